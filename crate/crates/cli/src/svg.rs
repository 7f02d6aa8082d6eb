//! Minimal static SVG writers.

use std::fmt::Write;

use pendulum_core::PhasePoint;

/// Longest polyline emitted; longer paths are thinned evenly.
const MAX_VERTICES: usize = 4000;

struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * self.width
    }

    fn py(&self, y: f64) -> f64 {
        self.top + (1.0 - (y - self.y.0) / (self.y.1 - self.y.0)) * self.height
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let _ = write!(
            out,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
            self.left, self.top, self.width, self.height
        );
        for (v, anchor) in [(self.x.0, "start"), (self.x.1, "end")] {
            let _ = write!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="{anchor}">{}</text>"#,
                self.px(v),
                self.top + self.height + 14.0,
                num(v)
            );
        }
        for v in [self.y.0, self.y.1] {
            let _ = write!(
                out,
                r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
                self.left - 4.0,
                self.py(v) + 4.0,
                num(v)
            );
        }
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{}</text>"#,
            self.left + self.width / 2.0,
            self.top + self.height + 28.0,
            escape(xlabel)
        );
        let _ = write!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
            self.left - 30.0,
            self.top + self.height / 2.0,
            self.left - 30.0,
            self.top + self.height / 2.0,
            escape(ylabel)
        );
    }
}

fn num(v: f64) -> String {
    format!("{}", (v * 1000.0).round() / 1000.0)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(width: u32, height: u32, title: &str) -> String {
    format!(
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">
<title>{}</title>
<rect width="100%" height="100%" fill="white"/>
"#,
        escape(title)
    )
}

fn polyline(out: &mut String, pts: &[(f64, f64)], stroke: &str, width: f64, extra: &str) {
    if pts.is_empty() {
        return;
    }
    let stride = pts.len().div_ceil(MAX_VERTICES).max(1);
    let mut d = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        if i % stride == 0 || i == pts.len() - 1 {
            let _ = write!(d, "{x:.2},{y:.2} ");
        }
    }
    let _ = writeln!(
        out,
        r#"<polyline points="{}" fill="none" stroke="{stroke}" stroke-width="{width}" {extra}/>"#,
        d.trim_end()
    );
}

/// Orthographic view of the sphere path next to the graph of `z(t)`.
pub fn trajectory(rows: &[(f64, PhasePoint)], title: &str) -> String {
    let mut out = header(900, 440, title);
    let (cx, cy, r) = (220.0, 220.0, 170.0);
    // view direction: azimuth 35°, elevation 20°
    let (sa, ca) = 35f64.to_radians().sin_cos();
    let (se, ce) = 20f64.to_radians().sin_cos();
    let project = |x: f64, y: f64, z: f64| {
        let horizontal = -x * sa + y * ca;
        let depth = x * ca + y * sa;
        let vertical = z * ce - depth * se;
        (cx + r * horizontal, cy - r * vertical)
    };
    let _ = writeln!(out, r##"<circle cx="{cx}" cy="{cy}" r="{r}" fill="#f4f6fb" stroke="#888"/>"##);
    let equator: Vec<(f64, f64)> = (0..=120)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / 120.0;
            project(a.cos(), a.sin(), 0.0)
        })
        .collect();
    polyline(&mut out, &equator, "#aaa", 1.0, r#"stroke-dasharray="4 3""#);
    let path: Vec<(f64, f64)> = rows.iter().map(|(_, p)| project(p.x, p.y, p.z)).collect();
    polyline(&mut out, &path, "#c0392b", 1.2, "");
    if let Some(&(x, y)) = path.first() {
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="3.5" fill="#1f4e9c"/>"##);
    }

    let t_max = rows.last().map(|r| r.0).unwrap_or(0.0).max(1e-12);
    let frame = Frame {
        left: 500.0,
        top: 40.0,
        width: 360.0,
        height: 340.0,
        x: (0.0, t_max),
        y: (-1.0, 1.0),
    };
    frame.axes(&mut out, "t", "z");
    let graph: Vec<(f64, f64)> = rows.iter().map(|(t, p)| (frame.px(*t), frame.py(p.z))).collect();
    polyline(&mut out, &graph, "#c0392b", 1.2, "");
    out.push_str("</svg>\n");
    out
}

/// Colour ramp from dark blue through teal to yellow, `u ∈ [0, 1]`.
fn ramp(u: f64) -> String {
    let stops = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let u = u.clamp(0.0, 1.0);
    let (i, w) = if u <= 0.5 { (0, u / 0.5) } else { (1, (u - 0.5) / 0.5) };
    let c: Vec<u8> = (0..3)
        .map(|k| (stops[i].1[k] + w * (stops[i + 1].1[k] - stops[i].1[k])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub struct Heat {
    pub j: f64,
    pub h: f64,
    pub value: Option<f64>,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn boundary_and_marker(out: &mut String, frame: &Frame, boundary: &[(f64, f64)], focus: Option<(f64, f64)>) {
    let curve: Vec<(f64, f64)> = boundary
        .iter()
        .filter(|(j, h)| *h <= frame.y.1 && *j >= frame.x.0 && *j <= frame.x.1)
        .map(|&(j, h)| (frame.px(j), frame.py(h)))
        .collect();
    polyline(out, &curve, "#111", 2.0, "");
    if let Some((j, h)) = focus {
        let _ = writeln!(
            out,
            r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="none" stroke="#d62728" stroke-width="2"/>"##,
            frame.px(j),
            frame.py(h)
        );
    }
}

/// Heat map of a period over the momentum image with its boundary curve
/// and the focus-focus value marked.
pub fn heatmap(cells: &[Heat], boundary: &[(f64, f64)], focus: Option<(f64, f64)>, label: &str) -> String {
    let mut out = header(640, 520, &format!("{label} over the momentum image"));
    let js = span(cells.iter().map(|c| c.j));
    let hs = span(cells.iter().map(|c| c.h));
    let frame = Frame {
        left: 70.0,
        top: 30.0,
        width: 460.0,
        height: 420.0,
        x: js,
        y: hs,
    };
    let mut uniq_j: Vec<f64> = cells.iter().map(|c| c.j).collect();
    uniq_j.sort_by(f64::total_cmp);
    uniq_j.dedup();
    let mut uniq_h: Vec<f64> = cells.iter().map(|c| c.h).collect();
    uniq_h.sort_by(f64::total_cmp);
    uniq_h.dedup();
    let cw = frame.width / uniq_j.len().max(1) as f64;
    let ch = frame.height / uniq_h.len().max(1) as f64;
    let vs = span(cells.iter().filter_map(|c| c.value));
    for c in cells {
        let fill = match c.value {
            Some(v) => ramp((v - vs.0) / (vs.1 - vs.0)),
            None => "#dddddd".into(),
        };
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{fill}"/>"#,
            frame.px(c.j) - cw / 2.0,
            frame.py(c.h) - ch / 2.0,
            cw,
            ch
        );
    }
    boundary_and_marker(&mut out, &frame, boundary, focus);
    frame.axes(&mut out, "j", "h");
    let band = frame.height / 11.0;
    for i in 0..=10 {
        let _ = writeln!(
            out,
            r#"<rect x="570" y="{:.1}" width="20" height="{:.1}" fill="{}"/>"#,
            frame.top + frame.height - band * (i as f64 + 1.0),
            band + 0.5,
            ramp(i as f64 / 10.0)
        );
    }
    let _ = writeln!(out, r#"<text x="595" y="450" font-size="11">{}</text>"#, num(vs.0));
    let _ = writeln!(out, r#"<text x="595" y="24" font-size="11">{}</text>"#, num(vs.1));
    out.push_str("</svg>\n");
    out
}

/// Scatter of momentum values with the boundary curve and focus-focus value.
pub fn momentum_image(points: &[(f64, f64)], boundary: &[(f64, f64)], focus: Option<(f64, f64)>, title: &str) -> String {
    let mut out = header(600, 520, title);
    let js = span(points.iter().map(|p| p.0).chain(boundary.iter().map(|b| b.0)));
    let hs = span(points.iter().map(|p| p.1).chain([0.0]));
    let frame = Frame {
        left: 70.0,
        top: 30.0,
        width: 500.0,
        height: 420.0,
        x: js,
        y: hs,
    };
    let _ = writeln!(out, r##"<g fill="#1f4e9c" fill-opacity="0.35">"##);
    for &(j, h) in points {
        let _ = writeln!(out, r#"<circle cx="{:.1}" cy="{:.1}" r="1.4"/>"#, frame.px(j), frame.py(h));
    }
    out.push_str("</g>\n");
    boundary_and_marker(&mut out, &frame, boundary, focus);
    frame.axes(&mut out, "j", "h");
    out.push_str("</svg>\n");
    out
}
