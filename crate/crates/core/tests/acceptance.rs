//! Acceptance run: one line per criterion, non-zero exit if any fails.

use std::f64::consts::{PI, SQRT_2, TAU};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;

use pendulum_core::action_angle::{action_a2, angles, monodromy, period_generators, published};
use pendulum_core::dynamics_general::GeneralFlow;
use pendulum_core::dynamics_quadratic::{joint_flow_quadratic_point, QuadraticFlow};
use pendulum_core::elliptic::{ellint_f, ellint_k, ellint_pi, ellint_pi_complete, jacobi_am, jacobi_sn};
use pendulum_core::oracle::{
    self, build_report, integrate_reference, integrate_samples, loop_action, measure_period, poisson_bracket_fd,
    quadrature_elliptic, random_constrained_points, random_fiber_point, random_regular_fibers, EllipticKind,
    IntegratorConfig, ReportConfig,
};
use pendulum_core::phase_space::{classify, momentum_map, Polynomial};
use pendulum_core::{PhasePoint, Potential, Quadratic, Stratum};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// Regular fibers kept `margin` away from the boundary parabola, the
/// focus-focus value and the line `j = 0`.
fn interior_fibers(count: usize, seed: u64, margin: f64) -> Vec<(f64, f64)> {
    let mut rng = oracle::rng(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let j: f64 = rng.gen_range(-1.2..1.2);
        let h: f64 = rng.gen_range(0.05..2.2);
        if h - 0.5 * j * j > margin && j.hypot(h - 1.0) > margin && j.abs() > margin {
            out.push((j, h));
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn elliptic_kernel() -> Verdict {
    let ks = linspace(0.0, 0.98, 20);
    let gammas = linspace(-4.0, 4.0, 20);
    let ns = linspace(-3.0, 0.9, 20);
    let fs = linspace(-5.0, 5.0, 20);
    let mut worst = (0.0f64, String::new());
    let mut roundtrip = 0.0f64;
    let mut note = |e: f64, what: String| {
        if e > worst.0 {
            worst = (e, what);
        }
    };
    for &k in &ks {
        note(rel(ellint_k(k).unwrap(), quadrature_elliptic(EllipticKind::K { k }).unwrap()), format!("K({k})"));
        for &g in &gammas {
            let f = ellint_f(g, k).unwrap();
            note(rel(f, quadrature_elliptic(EllipticKind::F { gamma: g, k }).unwrap()), format!("F({g},{k})"));
            for n in [-1.5, 0.6] {
                let got = ellint_pi(g, n, k).unwrap();
                let want = quadrature_elliptic(EllipticKind::Pi { gamma: g, n, k }).unwrap();
                note(rel(got, want), format!("Pi({g},{n},{k})"));
            }
            roundtrip = roundtrip.max((jacobi_am(f, k).unwrap() - g).abs());
        }
        for &n in &ns {
            let got = ellint_pi_complete(n, k).unwrap();
            note(rel(got, quadrature_elliptic(EllipticKind::PiComplete { n, k }).unwrap()), format!("Pi({n},{k})"));
        }
        for &f in &fs {
            note(rel(jacobi_am(f, k).unwrap(), quadrature_elliptic(EllipticKind::Am { f, k }).unwrap()), format!("am({f},{k})"));
            note(rel(jacobi_sn(f, k).unwrap(), quadrature_elliptic(EllipticKind::Sn { f, k }).unwrap()), format!("sn({f},{k})"));
        }
    }
    verdict(
        worst.0 <= 1e-10 && roundtrip <= 1e-11,
        format!("max error {:.2e} at {} (tol 1e-10), am∘F round trip {roundtrip:.2e} (tol 1e-11)", worst.0, worst.1),
    )
}

fn commutation() -> Verdict {
    let quartic = Polynomial::skewed_quartic();
    let potentials: [(&str, &dyn Potential); 2] = [("z²", &Quadratic), ("skewed quartic", &quartic)];
    let mut parts = Vec::new();
    let mut pass = true;
    for (i, (name, v)) in potentials.iter().enumerate() {
        let worst = random_constrained_points(100, 200 + i as u64)
            .iter()
            .map(|p| poisson_bracket_fd(p, *v).abs())
            .fold(0.0, f64::max);
        pass &= worst <= 1e-6;
        parts.push(format!("{name}: max |{{J,H}}| {worst:.2e}"));
    }
    verdict(pass, format!("{} (tol 1e-6)", parts.join(", ")))
}

fn drift(points: &[PhasePoint], v: &dyn Potential, j: f64, h: f64) -> f64 {
    points
        .iter()
        .map(|q| {
            let m = momentum_map(q, v);
            (m.j - j).abs().max((m.h - h).abs())
        })
        .fold(0.0, f64::max)
}

fn flow_conservation() -> Verdict {
    let times = linspace(-50.0, 50.0, 21);
    let quadratic = random_regular_fibers(100, 300)
        .par_iter()
        .enumerate()
        .map(|(i, &(j, h))| {
            let mut rng = oracle::rng(3000 + i as u64);
            let p = random_fiber_point(j, h, &Quadratic, &mut rng).unwrap();
            let flow = QuadraticFlow::new(&p).unwrap();
            let pts: Vec<PhasePoint> = times.iter().map(|&t| flow.point_at(t).unwrap()).collect();
            drift(&pts, &Quadratic, j, h)
        })
        .reduce(|| 0.0, f64::max);

    let quartic = Polynomial::skewed_quartic();
    let starts: Vec<PhasePoint> = random_constrained_points(400, 301)
        .into_iter()
        .filter(|p| GeneralFlow::new(p, &quartic).is_ok())
        .take(100)
        .collect();
    let general = starts
        .par_iter()
        .map(|p| {
            let m = momentum_map(p, &quartic);
            let flow = GeneralFlow::new(p, &quartic).unwrap();
            let pts: Vec<PhasePoint> = times.iter().map(|&t| flow.point_at(t).unwrap()).collect();
            drift(&pts, &quartic, m.j, m.h)
        })
        .reduce(|| 0.0, f64::max);
    verdict(
        quadratic <= 1e-9 && general <= 1e-9 && starts.len() == 100,
        format!(
            "max drift closed form {quadratic:.2e}, general V {general:.2e} over |t| ≤ 50, {} general starts (tol 1e-9)",
            starts.len()
        ),
    )
}

fn closed_form_vs_oracle() -> Verdict {
    let mut fibers = Vec::new();
    for &j in &linspace(-1.0, 1.0, 10) {
        for &d in &linspace(0.05, 1.5, 10) {
            fibers.push((j, 0.5 * j * j + d));
        }
    }
    let cfg = IntegratorConfig::default();
    let worst = fibers
        .par_iter()
        .map(|&(j, h)| {
            assert_eq!(classify(j, h), Stratum::Regular);
            let p = PhasePoint::section_point(j, h, &Quadratic).unwrap();
            let flow = QuadraticFlow::new(&p).unwrap();
            let (_, big_t) = period_generators(j, h).unwrap().periods.unwrap();
            let times = linspace(0.0, big_t, 9);
            let reference = integrate_samples(&p, &Quadratic, &times, cfg).unwrap();
            times
                .iter()
                .zip(&reference)
                .map(|(&t, r)| flow.point_at(t).unwrap().distance(r))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    verdict(worst <= 1e-7, format!("max distance {worst:.2e} over one period on 100 fibers (tol 1e-7)"))
}

fn period_lattice() -> Verdict {
    let cfg = IntegratorConfig::default();
    let (closed, reference) = random_regular_fibers(50, 500)
        .par_iter()
        .enumerate()
        .map(|(i, &(j, h))| {
            let mut rng = oracle::rng(5000 + i as u64);
            let p = random_fiber_point(j, h, &Quadratic, &mut rng).unwrap();
            let (s, t) = period_generators(j, h).unwrap().periods.unwrap();
            let closed = joint_flow_quadratic_point(&p, s, t).unwrap().distance(&p);
            let reference = integrate_reference(&p.rotate(s), &Quadratic, t, cfg).unwrap().distance(&p);
            (closed, reference)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));

    // On the boundary the H-flow is itself a rotation, so the isotropy is
    // one-dimensional and only (1, 0) generates the lattice.
    let mut boundary_ok = true;
    let mut boundary_err = 0.0f64;
    for &j in &linspace(-1.2, 1.2, 10) {
        let h = 0.5 * j * j;
        let lattice = period_generators(j, h).unwrap();
        boundary_ok &= lattice.rank == 1 && lattice.generators() == vec![[1.0, 0.0]];
        let p = PhasePoint::section_point(j, h, &Quadratic).unwrap();
        for t in [0.7, 2.3] {
            let q = integrate_reference(&p, &Quadratic, t, cfg).unwrap();
            let s = q.y.atan2(q.x);
            boundary_err = boundary_err.max(q.distance(&p.rotate(s)));
        }
        boundary_ok &= p.rotate(TAU).distance(&p) <= 1e-12;
    }
    verdict(
        closed <= 1e-6 && reference <= 1e-6 && boundary_ok && boundary_err <= 1e-6,
        format!(
            "return distance closed form {closed:.2e}, reference {reference:.2e} (tol 1e-6); \
             boundary rank 1 {boundary_ok}, H-flow as rotation {boundary_err:.2e}"
        ),
    )
}

fn published_periods() -> Verdict {
    let fibers: Vec<(f64, f64)> = [0.25, 0.5, 0.75].iter().map(|&h| (0.0, h)).collect();
    let report = build_report(&fibers, &ReportConfig::default());
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &report.records {
        let get = |name: &str| r.check(name).and_then(|c| Some((c.formula?, c.oracle?)));
        let (Some(t), Some(general), Some(special)) = (get("T"), get("T_published"), get("T_published_special")) else {
            pass = false;
            parts.push(format!("h={} missing entries", r.h));
            continue;
        };
        pass &= general.1 == t.1 && special.1 == t.1;
        let shipped = (t.0 - t.1).abs() / t.1;
        pass &= shipped <= 1e-6;
        pass &= published::special_case(0.0, r.h).map(|p| p.1) == Some(special.0);
        pass &= published::general_formula(0.0, r.h).ok().map(|p| p.1) == Some(general.0);
        parts.push(format!(
            "h={}: T {:.9} oracle {:.9} (rel {shipped:.1e}), general {:.6}, special {:.6}",
            r.h, t.0, t.1, general.0, special.0
        ));
    }
    let small = measure_period(0.0, 1e-3, &Quadratic, IntegratorConfig::default()).unwrap().t;
    let lin = (small - PI * SQRT_2).abs() / (PI * SQRT_2);
    pass &= lin <= 1e-2;
    parts.push(format!("T_oracle(0, 1e-3) = {small:.6} vs π√2 (rel {lin:.1e}, tol 1e-2)"));
    verdict(pass, parts.join("; "))
}

fn gradient_law() -> Verdict {
    let e = 1e-4;
    let worst = interior_fibers(20, 700, 0.05)
        .par_iter()
        .map(|&(j, h)| {
            let (s, t) = period_generators(j, h).unwrap().periods.unwrap();
            let dj = (action_a2(j + e, h).unwrap() - action_a2(j - e, h).unwrap()) / (2.0 * e);
            let dh = (action_a2(j, h + e).unwrap() - action_a2(j, h - e).unwrap()) / (2.0 * e);
            let (gj, gh) = (s / TAU, t / TAU);
            (dj - gj).hypot(dh - gh) / gj.hypot(gh)
        })
        .reduce(|| 0.0, f64::max);
    verdict(worst <= 1e-5, format!("max relative |∇A₂ − (S,T)/2π| {worst:.2e} on 20 fibers (tol 1e-5)"))
}

fn loop_action_consistency() -> Verdict {
    let cfg = IntegratorConfig::default();
    let diffs: Vec<f64> = interior_fibers(20, 800, 0.05)
        .par_iter()
        .map(|&(j, h)| loop_action(j, h, &Quadratic, cfg).unwrap() - action_a2(j, h).unwrap())
        .collect();
    let lo = diffs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = diffs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        hi - lo <= 1e-5,
        format!("loop_action − A₂ ∈ [{lo:.9}, {hi:.9}], spread {:.2e} (tol 1e-5)", hi - lo),
    )
}

/// Least-squares slope and largest residual of `y` against `x`.
fn regression(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    let resid = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).abs())
        .fold(0.0, f64::max);
    (slope, resid)
}

fn unwrap_angles(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut offset = 0.0;
    for (i, &v) in a.iter().enumerate() {
        if i > 0 {
            let prev = a[i - 1];
            offset += TAU * ((prev - v) / TAU).round();
        }
        out.push(v + offset);
    }
    out
}

fn angle_linearity() -> Verdict {
    let cfg = IntegratorConfig::default();
    let results: Vec<(f64, f64, f64, f64)> = interior_fibers(10, 900, 0.05)
        .par_iter()
        .enumerate()
        .map(|(i, &(j, h))| {
            let mut rng = oracle::rng(9000 + i as u64);
            let p = random_fiber_point(j, h, &Quadratic, &mut rng).unwrap();
            let (s, t) = period_generators(j, h).unwrap().periods.unwrap();
            let times = linspace(0.0, 2.0 * t, 161);
            let pts = integrate_samples(&p, &Quadratic, &times, cfg).unwrap();
            let (a1, a2): (Vec<f64>, Vec<f64>) = pts.iter().map(|q| angles(q).unwrap()).unzip();
            let (m2, r2) = regression(&times, &unwrap_angles(&a2));
            let (m1, r1) = regression(&times, &unwrap_angles(&a1));
            let w2 = TAU / t;
            let w1 = -s / t;
            ((m2 - w2).abs() / w2, r2, (m1 - w1).abs() / w1.abs().max(1.0), r1)
        })
        .collect();
    let max = |f: fn(&(f64, f64, f64, f64)) -> f64| results.iter().map(f).fold(0.0, f64::max);
    let (e2, r2, e1, r1) = (max(|r| r.0), max(|r| r.1), max(|r| r.2), max(|r| r.3));
    verdict(
        e2 <= 1e-6 && r2 <= 1e-6 && e1 <= 1e-6 && r1 <= 1e-6,
        format!(
            "α₂ slope rel err {e2:.2e}, residual {r2:.2e}; α₁ slope rel err {e1:.2e}, residual {r1:.2e} (tol 1e-6)"
        ),
    )
}

fn monodromy_matrix() -> Verdict {
    let m = monodromy((0.0, 1.0), 0.3, 360).unwrap();
    let recovery = (0..4)
        .map(|i| (m.matrix[i / 2][i % 2] - m.integer[i / 2][i % 2] as f64).abs())
        .fold(0.0, f64::max);
    let n = m.integer;
    let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
    let off = n[0][1].abs().max(n[1][0].abs());
    verdict(
        recovery <= 1e-3 && det == 1 && off == 2,
        format!("M = {:?}, det {det}, max |entry − integer| {recovery:.2e} (tol 1e-3)", n),
    )
}

/// Name, check and runtime budget in seconds.
type Criterion = (&'static str, fn() -> Verdict, u64);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("elliptic kernel vs quadrature", elliptic_kernel, 10),
        ("commutation {J,H} = 0", commutation, 5),
        ("flow conservation", flow_conservation, 60),
        ("closed form vs reference integrator", closed_form_vs_oracle, 120),
        ("period lattice", period_lattice, 120),
        ("published period adjudication", published_periods, 30),
        ("action gradient law", gradient_law, 60),
        ("loop action consistency", loop_action_consistency, 120),
        ("angle linearity", angle_linearity, 60),
        ("monodromy", monodromy_matrix, 180),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = v.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {}: {name}: {} [{:.2} s, budget {budget} s]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
