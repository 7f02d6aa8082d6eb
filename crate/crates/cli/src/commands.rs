use std::fs;
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};

use pendulum_core::action_angle::{action_a2, period_generators, published};
use pendulum_core::dynamics_general::{self as general, FiberBand};
use pendulum_core::dynamics_quadratic::{self as quadratic, QuadraticFiberParams};
use pendulum_core::oracle::{self, IntegratorConfig, ReportConfig, Tolerances};
use pendulum_core::phase_space::{classify, fmt17, momentum_map, validate_potential, FnPotential};
use pendulum_core::{PhasePoint, Potential, Quadratic, Stratum};

use crate::svg;
use crate::{CliError, Format, GridArgs, GridSelection, MapArgs, PotentialArgs, TrajectoryArgs, VerifyArgs};

type Outcome = Result<(), CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

thread_local! {
    static BUILTIN: meval::Context<'static> = meval::builtin();
}

fn eval(expr: &meval::Expr, z: f64) -> Result<f64, meval::Error> {
    BUILTIN.with(|ctx| expr.eval_with_context((("z", z), ctx)))
}

impl PotentialArgs {
    fn is_quadratic(&self) -> bool {
        self.potential.is_none()
    }

    fn build(&self) -> Result<Box<dyn Potential>, CliError> {
        let (Some(v), Some(dv)) = (&self.potential, &self.dpotential) else {
            return Ok(Box::new(Quadratic));
        };
        let bind = |src: &str, what: &str| -> Result<Box<dyn Fn(f64) -> f64 + Send + Sync>, CliError> {
            let expr = src
                .parse::<meval::Expr>()
                .map_err(|e| usage(format!("cannot parse {what} \"{src}\": {e}")))?;
            eval(&expr, 0.0).map_err(|e| usage(format!("cannot use {what} \"{src}\": {e}")))?;
            Ok(Box::new(move |z| eval(&expr, z).unwrap_or(f64::NAN)))
        };
        let potential = FnPotential::new(v.clone(), bind(v, "--potential")?, bind(dv, "--dpotential")?);
        validate_potential(&potential).map_err(|e| usage(format!("invalid potential: {e}")))?;
        Ok(Box::new(potential))
    }
}

fn require_quadratic(p: &PotentialArgs, what: &str) -> Outcome {
    if p.is_quadratic() {
        Ok(())
    } else {
        Err(usage(format!("{what} are only available for V(z) = z²")))
    }
}

fn write_output(path: &Option<PathBuf>, content: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, content).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn outside(j: f64, h: f64) -> CliError {
    usage(format!("({j}, {h}) is outside momentum image"))
}

fn parse_x0(src: &str) -> Result<PhasePoint, CliError> {
    let values: Vec<f64> = src
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| usage(format!("--x0: {e}")))?;
    let arr: [f64; 6] = values
        .try_into()
        .map_err(|v: Vec<f64>| usage(format!("--x0 needs 6 values, got {}", v.len())))?;
    let p = PhasePoint::from_array(arr);
    if !p.is_constrained(1e-9) {
        let (c1, c2) = p.constraint_residuals();
        return Err(usage(format!("--x0 is not on T*S²: |r|² − 1 = {c1:e}, r·p = {c2:e}")));
    }
    Ok(p)
}

fn rows_json(rows: &[(f64, PhasePoint)], potential: &dyn Potential, extra: &dyn Fn(usize) -> Value) -> String {
    let arr: Vec<Value> = rows
        .iter()
        .enumerate()
        .map(|(i, (t, p))| {
            let mv = momentum_map(p, potential);
            let mut v = json!({
                "t": t, "x": p.x, "y": p.y, "z": p.z, "u": p.u, "v": p.v, "w": p.w, "j": mv.j, "h": mv.h,
            });
            if let (Value::Object(m), Value::Object(e)) = (&mut v, extra(i)) {
                m.extend(e);
            }
            v
        })
        .collect();
    serde_json::to_string_pretty(&arr).expect("rows serialise") + "\n"
}

/// Fiber used when neither `--j/--h` nor `--x0` is given.
const DEFAULT_FIBER: (f64, f64) = (0.4, 1.2);

pub fn trajectory(a: &TrajectoryArgs) -> Outcome {
    let potential = a.potential.build()?;
    let v = potential.as_ref();
    if !a.t_max.is_finite() {
        return Err(usage("--t-max must be finite"));
    }
    let p0 = match (&a.x0, a.j, a.h) {
        (Some(src), _, _) => parse_x0(src)?,
        (None, j, h) => {
            let (j, h) = (j.unwrap_or(DEFAULT_FIBER.0), h.unwrap_or(DEFAULT_FIBER.1));
            if classify(j, h) == Stratum::Outside {
                return Err(outside(j, h));
            }
            PhasePoint::section_point(j, h, v).map_err(|_| outside(j, h))?
        }
    };
    let samples = a.samples.max(1);

    let mut quadratic_rows = None;
    if a.potential.is_quadratic() {
        if let Ok(rows) = quadratic::trajectory(&p0, a.t_max, samples) {
            quadratic_rows = Some(rows);
        }
    }
    let rows: Vec<(f64, PhasePoint)> = match &quadratic_rows {
        Some(r) => r.iter().map(|(t, p, _)| (*t, *p)).collect(),
        None => match general::trajectory(&p0, v, a.t_max, samples) {
            Ok(r) => r,
            Err(_) => {
                eprintln!("pendulum: singular fiber, sampling with the reference integrator");
                let times = general::sample_times(a.t_max, samples);
                let pts = oracle::integrate_samples(&p0, v, &times, IntegratorConfig::default())?;
                times.into_iter().zip(pts).collect()
            }
        },
    };

    let title = {
        let mv = momentum_map(&p0, v);
        format!("trajectory on the fiber j = {:.4}, h = {:.4}", mv.j, mv.h)
    };
    let body = match a.format {
        Format::Csv => match &quadratic_rows {
            Some(r) => {
                let mv = momentum_map(&p0, v);
                quadratic::trajectory_csv(r, &QuadraticFiberParams::new(mv.j, mv.h)?)
            }
            None => general::trajectory_csv(&rows, v),
        },
        Format::Json => match &quadratic_rows {
            Some(r) => {
                let mv = momentum_map(&p0, v);
                let params = QuadraticFiberParams::new(mv.j, mv.h)?;
                rows_json(&rows, v, &|i| json!({"k": params.k, "ell": params.ell, "gamma": r[i].2}))
            }
            None => rows_json(&rows, v, &|_| json!({})),
        },
        Format::Svg => svg::trajectory(&rows, &title),
    };
    write_output(&a.out, &body)?;
    if let Some(path) = &a.svg {
        fs::write(path, svg::trajectory(&rows, &title))?;
    }
    Ok(())
}

const GRID_J: (f64, f64) = (-1.2, 1.2);
const GRID_H: (f64, f64) = (0.05, 2.2);

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (range.0 + range.1)];
    }
    (0..n)
        .map(|i| range.0 + (range.1 - range.0) * i as f64 / (n - 1) as f64)
        .collect()
}

impl GridSelection {
    fn fibers(&self) -> Result<Vec<(f64, f64)>, CliError> {
        if let Some(n) = self.grid {
            if n == 0 {
                return Err(usage("--grid needs at least 1 point per axis"));
            }
            let hs = linspace(GRID_H, n);
            return Ok(linspace(GRID_J, n)
                .into_iter()
                .flat_map(|j| hs.iter().map(move |&h| (j, h)))
                .collect());
        }
        match (self.j.is_empty(), self.h.is_empty()) {
            (true, true) => Ok(oracle::default_grid()),
            (false, false) => Ok(self
                .j
                .iter()
                .flat_map(|&j| self.h.iter().map(move |&h| (j, h)))
                .collect()),
            _ => Err(usage("--j and --h must be given together")),
        }
    }
}

/// Drops fibers outside the image with a warning; a lone outside fiber is an error.
fn admissible(fibers: Vec<(f64, f64)>) -> Result<Vec<(f64, f64)>, CliError> {
    if let [(j, h)] = fibers[..] {
        if classify(j, h) == Stratum::Outside {
            return Err(outside(j, h));
        }
    }
    let kept: Vec<(f64, f64)> = fibers
        .into_iter()
        .filter(|&(j, h)| {
            let ok = classify(j, h) != Stratum::Outside;
            if !ok {
                eprintln!("pendulum: skipping ({j}, {h}): outside momentum image");
            }
            ok
        })
        .collect();
    if kept.is_empty() {
        return Err(usage("no fiber of the grid lies in the momentum image"));
    }
    Ok(kept)
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

fn boundary_curve(js: impl Iterator<Item = f64>, potential: &dyn Potential) -> Vec<(f64, f64)> {
    let (lo, hi) = js.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), j| (a.min(j), b.max(j)));
    let (lo, hi) = if lo.is_finite() { (lo.min(-0.1), hi.max(0.1)) } else { (-1.0, 1.0) };
    linspace((lo, hi), 241)
        .into_iter()
        .map(|j| {
            let h = (1..2000)
                .map(|i| {
                    let z = -1.0 + i as f64 / 1000.0;
                    j * j / (2.0 * (1.0 - z * z)) + potential.value(z)
                })
                .fold(f64::INFINITY, f64::min);
            (j, h)
        })
        .collect()
}

struct ActionRow {
    j: f64,
    h: f64,
    k: f64,
    ell: f64,
    formula: Option<(f64, f64)>,
    oracle: Option<(f64, f64)>,
    a2: Option<f64>,
    flag: bool,
}

fn action_row(j: f64, h: f64, tol: f64) -> Result<Option<ActionRow>, String> {
    match classify(j, h) {
        Stratum::Regular => {
            let params = QuadraticFiberParams::new(j, h).map_err(|e| e.to_string())?;
            let (s, t) = period_generators(j, h)
                .map_err(|e| e.to_string())?
                .periods
                .expect("regular fiber");
            let m = oracle::measure_period(j, h, &Quadratic, IntegratorConfig::default()).map_err(|e| e.to_string())?;
            let a2 = action_a2(j, h).map_err(|e| e.to_string())?;
            let ds = (s - m.s).abs() / m.s.abs().max(1.0);
            let dt = (t - m.t).abs() / m.t;
            Ok(Some(ActionRow {
                j,
                h,
                k: params.k,
                ell: params.ell,
                formula: Some((s, t)),
                oracle: Some((m.s, m.t)),
                a2: Some(a2),
                flag: ds.max(dt) > tol,
            }))
        }
        Stratum::EllipticBoundary => Ok(Some(ActionRow {
            j,
            h,
            k: 0.0,
            ell: 0.0,
            formula: None,
            oracle: None,
            a2: None,
            flag: false,
        })),
        Stratum::FocusFocus => {
            eprintln!("pendulum: skipping ({j}, {h}): focus-focus fiber");
            Ok(None)
        }
        Stratum::Outside => Ok(None),
    }
}

pub fn actions(a: &GridArgs) -> Outcome {
    require_quadratic(&a.selection.potential, "actions")?;
    let fibers = admissible(a.selection.fibers()?)?;
    let rows: Vec<Option<ActionRow>> = fibers
        .par_iter()
        .map(|&(j, h)| action_row(j, h, a.tol))
        .collect::<Result<_, _>>()
        .map_err(usage)?;
    let rows: Vec<ActionRow> = rows.into_iter().flatten().collect();

    let cells: Vec<svg::Heat> = rows
        .iter()
        .map(|r| svg::Heat {
            j: r.j,
            h: r.h,
            value: r.formula.map(|f| f.1),
        })
        .collect();
    let heatmap = || svg::heatmap(&cells, &boundary_curve(rows.iter().map(|r| r.j), &Quadratic), Some((0.0, 1.0)), "T");
    let body = match a.format {
        Format::Csv => {
            let mut out = String::from("j,h,k,ell,S_formula,T_formula,S_oracle,T_oracle,A2,discrepancy_flag\n");
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    fmt17(r.j),
                    fmt17(r.h),
                    fmt17(r.k),
                    fmt17(r.ell),
                    opt(r.formula.map(|f| f.0)),
                    opt(r.formula.map(|f| f.1)),
                    opt(r.oracle.map(|f| f.0)),
                    opt(r.oracle.map(|f| f.1)),
                    opt(r.a2),
                    u8::from(r.flag)
                ));
            }
            out
        }
        Format::Json => {
            let arr: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "j": r.j, "h": r.h, "k": r.k, "ell": r.ell,
                        "S_formula": r.formula.map(|f| f.0), "T_formula": r.formula.map(|f| f.1),
                        "S_oracle": r.oracle.map(|f| f.0), "T_oracle": r.oracle.map(|f| f.1),
                        "A2": r.a2, "discrepancy_flag": r.flag,
                    })
                })
                .collect();
            serde_json::to_string_pretty(&arr).expect("rows serialise") + "\n"
        }
        Format::Svg => heatmap(),
    };
    write_output(&a.out, &body)?;
    if let Some(path) = &a.svg {
        fs::write(path, heatmap())?;
    }
    Ok(())
}

const PERIOD_HEADER: &str =
    "j,h,stratum,rank,S,T,S_published,T_published,T_published_special,S_oracle,T_oracle,T_oracle_error\n";

struct PeriodRow {
    j: f64,
    h: f64,
    stratum: Stratum,
    rank: u8,
    shipped: Option<(f64, f64)>,
    published: Option<(f64, f64)>,
    special: Option<f64>,
    oracle: Option<(f64, f64, f64)>,
}

fn period_row(j: f64, h: f64, potential: &dyn Potential, quadratic: bool) -> Result<PeriodRow, String> {
    let stratum = classify(j, h);
    let mut row = PeriodRow {
        j,
        h,
        stratum,
        rank: 0,
        shipped: None,
        published: None,
        special: None,
        oracle: None,
    };
    match stratum {
        Stratum::Regular => {
            row.rank = 2;
            row.shipped = Some(if quadratic {
                period_generators(j, h).map_err(|e| e.to_string())?.periods.expect("regular fiber")
            } else {
                FiberBand::new(j, h, potential).map_err(|e| e.to_string())?.periods()
            });
            if quadratic {
                row.published = published::general_formula(j, h).ok();
                row.special = published::special_case(j, h).map(|p| p.1);
            }
            let m = oracle::measure_period(j, h, potential, IntegratorConfig::default()).map_err(|e| e.to_string())?;
            row.oracle = Some((m.s, m.t, m.t_error));
        }
        Stratum::EllipticBoundary => row.rank = 1,
        _ => {}
    }
    Ok(row)
}

pub fn periods(a: &GridArgs) -> Outcome {
    let potential = a.selection.potential.build()?;
    let quadratic = a.selection.potential.is_quadratic();
    let fibers = admissible(a.selection.fibers()?)?;
    let rows: Vec<PeriodRow> = fibers
        .par_iter()
        .map(|&(j, h)| period_row(j, h, potential.as_ref(), quadratic))
        .collect::<Result<_, _>>()
        .map_err(usage)?;
    let cells: Vec<svg::Heat> = rows
        .iter()
        .map(|r| svg::Heat {
            j: r.j,
            h: r.h,
            value: r.shipped.map(|p| p.1),
        })
        .collect();
    let heatmap = || {
        svg::heatmap(
            &cells,
            &boundary_curve(rows.iter().map(|r| r.j), potential.as_ref()),
            Some((0.0, 1.0)),
            "T",
        )
    };
    let body = match a.format {
        Format::Csv => {
            let mut out = String::from(PERIOD_HEADER);
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    fmt17(r.j),
                    fmt17(r.h),
                    r.stratum,
                    r.rank,
                    opt(r.shipped.map(|p| p.0)),
                    opt(r.shipped.map(|p| p.1)),
                    opt(r.published.map(|p| p.0)),
                    opt(r.published.map(|p| p.1)),
                    opt(r.special),
                    opt(r.oracle.map(|o| o.0)),
                    opt(r.oracle.map(|o| o.1)),
                    opt(r.oracle.map(|o| o.2)),
                ));
            }
            out
        }
        Format::Json => {
            let arr: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "j": r.j, "h": r.h, "stratum": r.stratum.to_string(), "rank": r.rank,
                        "S": r.shipped.map(|p| p.0), "T": r.shipped.map(|p| p.1),
                        "S_published": r.published.map(|p| p.0), "T_published": r.published.map(|p| p.1),
                        "T_published_special": r.special,
                        "S_oracle": r.oracle.map(|o| o.0), "T_oracle": r.oracle.map(|o| o.1),
                        "T_oracle_error": r.oracle.map(|o| o.2),
                    })
                })
                .collect();
            serde_json::to_string_pretty(&arr).expect("rows serialise") + "\n"
        }
        Format::Svg => heatmap(),
    };
    write_output(&a.out, &body)?;
    if let Some(path) = &a.svg {
        fs::write(path, heatmap())?;
    }
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Outcome {
    require_quadratic(&a.grid.potential, "verification reports")?;
    if let Some(t) = a.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage("--tol must be a positive number"));
        }
    }
    let fibers = admissible(a.grid.fibers()?)?;
    let cfg = ReportConfig {
        seed: a.seed,
        tolerances: Tolerances {
            published_rel: a.tol,
            ..Tolerances::default()
        },
        flow_samples: a.samples.max(1),
        ..ReportConfig::default()
    };
    let report = oracle::build_report(&fibers, &cfg);
    write_output(&a.out, &(report.to_json() + "\n"))?;
    let failed: Vec<String> = report
        .records
        .iter()
        .filter(|r| !r.pass)
        .map(|r| {
            let names: Vec<&str> = r
                .checks
                .iter()
                .filter(|c| c.enforced && !c.pass)
                .map(|c| c.name.as_str())
                .collect();
            let what = if names.is_empty() {
                r.note.clone().unwrap_or_default()
            } else {
                names.join(", ")
            };
            format!("({}, {}): {what}", r.j, r.h)
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        for f in &failed {
            eprintln!("pendulum: failed {f}");
        }
        Err(CliError::Verification(format!(
            "{} of {} records failed",
            failed.len(),
            report.records.len()
        )))
    }
}

pub fn map_image(a: &MapArgs) -> Outcome {
    let potential = a.potential.build()?;
    let v = potential.as_ref();
    let points: Vec<(f64, f64)> = oracle::random_constrained_points(a.samples, a.seed)
        .iter()
        .map(|p| {
            let mv = momentum_map(p, v);
            (mv.j, mv.h)
        })
        .collect();
    let boundary = boundary_curve(points.iter().map(|p| p.0), v);
    let body = svg::momentum_image(&points, &boundary, Some((0.0, 1.0)), "image of the momentum map (J, H)");
    write_output(&a.out, &body)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace((0.0, 1.0), 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(linspace((0.0, 1.0), 1), vec![0.5]);
    }

    #[test]
    fn x0_parsing() {
        assert!(parse_x0("1,0,0,0,0.4,0.9").is_ok());
        assert!(parse_x0("1,0,0").is_err());
        assert!(parse_x0("2,0,0,0,0,0").is_err());
        assert!(parse_x0("1,0,0,a,0,0").is_err());
    }

    #[test]
    fn quadratic_boundary_is_parabola() {
        let b = boundary_curve([-1.0, 1.0].into_iter(), &Quadratic);
        for (j, h) in b {
            assert!((h - 0.5 * j * j).abs() < 1e-12);
        }
    }

    #[test]
    fn expression_potential() {
        let args = PotentialArgs {
            quadratic: false,
            potential: Some("z^2*(1 + 0.3*z*(1 - z^2))".into()),
            dpotential: Some("2*z + 0.9*z^2 - 1.5*z^4".into()),
        };
        let v = args.build().unwrap();
        assert!((v.value(0.5) - 0.25 * (1.0 + 0.15 * 0.75)).abs() < 1e-15);
        let bad = PotentialArgs {
            quadratic: false,
            potential: Some("z^3".into()),
            dpotential: Some("3*z^2".into()),
        };
        assert!(bad.build().is_err());
    }
}
