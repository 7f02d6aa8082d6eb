//! Independent reference computations: ambient ODE integration, return-map
//! periods, loop actions, finite-difference brackets and elliptic integrals
//! by direct quadrature.

mod integrator;
pub mod report;

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics_general::{FiberBand, GeneralFlow};
use crate::error::{Error, Result};
use crate::phase_space::{classify, PhasePoint, Potential, Stratum};
use crate::quadrature::{integrate, QuadConfig};

pub use integrator::{integrate_reference, integrate_samples, IntegratorConfig};
use integrator::{project_state, state_point, Stepper};
pub use report::{build_report, default_grid, Check, FiberRecord, ReportConfig, Tolerances, VerificationReport};

/// Return-map measurement from the section point `(1, 0, 0, 0, j, w₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodMeasurement {
    /// `−Δθ` over one return, not reduced mod `2π`.
    pub s: f64,
    /// First return time to `{z = 0, ż > 0}`.
    pub t: f64,
    /// Accumulated local error in `z` divided by `|ż|` at the return.
    pub t_error: f64,
    /// `∫₀^T |p|² dt`.
    pub kinetic: f64,
    /// Point reached at the return.
    pub end: PhasePoint,
}

/// Time limit after which a return is declared missing.
pub const SECTION_LIMIT: f64 = 100.0 * TAU;

pub fn measure_period(j: f64, h: f64, potential: &dyn Potential, cfg: IntegratorConfig) -> Result<PeriodMeasurement> {
    FiberBand::new(j, h, potential)?;
    let start = PhasePoint::section_point(j, h, potential)?;
    let mut stepper = Stepper::new(&start, potential, cfg)?;
    stepper.system.j = j;
    loop {
        let (y_prev, t_prev) = (stepper.y, stepper.t);
        stepper.advance(SECTION_LIMIT - stepper.t)?;
        if y_prev[2] < 0.0 && stepper.y[2] >= 0.0 {
            let step = stepper.t - t_prev;
            let z_at = |dt: f64| stepper.system.step(&y_prev, dt).0[2];
            let dt = refine_crossing(z_at, step, y_prev[2]);
            let mut y = stepper.system.step(&y_prev, dt).0;
            project_state(&mut y);
            return Ok(PeriodMeasurement {
                s: -y[6],
                t: t_prev + dt,
                t_error: stepper.z_error / y[5].abs().max(1e-300),
                kinetic: y[7],
                end: state_point(&y),
            });
        }
        if stepper.t >= SECTION_LIMIT {
            return Err(Error::SectionMissed { limit: SECTION_LIMIT });
        }
    }
}

/// Illinois false position for the sub-step `dt ∈ (0, step]` with `z(dt) = 0`.
fn refine_crossing(z_at: impl Fn(f64) -> f64, step: f64, z0: f64) -> f64 {
    let (mut a, mut fa) = (0.0, z0);
    let (mut b, mut fb) = (step, z_at(step));
    if fb < 0.0 {
        // projection nudged the accepted state across; the raw step did not
        return step;
    }
    let mut side = 0;
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = z_at(c);
        if fc == 0.0 || (b - a).abs() <= 1e-15 * step {
            return c;
        }
        if fc < 0.0 {
            a = c;
            fa = fc;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = c;
            fb = fc;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
        if fa.abs().min(fb.abs()) < 1e-17 {
            break;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

/// `(1/2π) ∮ λ` over the cycle of `S X_J + T X_H`, using the measured
/// `(S, T)`: `(∫₀^T |p|² dt + j S)/2π`.
pub fn loop_action(j: f64, h: f64, potential: &dyn Potential, cfg: IntegratorConfig) -> Result<f64> {
    Ok(loop_action_from(j, &measure_period(j, h, potential, cfg)?))
}

pub fn loop_action_from(j: f64, m: &PeriodMeasurement) -> f64 {
    (m.kinetic + j * m.s) / TAU
}

fn ambient_j(y: &[f64; 6]) -> f64 {
    y[0] * y[4] - y[1] * y[3]
}

fn ambient_h(y: &[f64; 6], potential: &dyn Potential) -> f64 {
    0.5 * (y[3] * y[3] + y[4] * y[4] + y[5] * y[5]) + potential.value(y[2])
}

fn fd_gradient(f: &dyn Fn(&[f64; 6]) -> f64, y: &[f64; 6]) -> [f64; 6] {
    const STEP: f64 = 1e-6;
    let mut g = [0.0; 6];
    for i in 0..6 {
        let mut a = *y;
        let mut b = *y;
        a[i] += STEP;
        b[i] -= STEP;
        g[i] = (f(&a) - f(&b)) / (2.0 * STEP);
    }
    g
}

/// Dirac bracket for the constraints `φ₁ = (|r|² − 1)/2`, `φ₂ = r·p`.
fn dirac(gf: &[f64; 6], gg: &[f64; 6], y: &[f64; 6]) -> f64 {
    let canon = |a: &[f64; 6], b: &[f64; 6]| (0..3).map(|i| a[i] * b[3 + i] - a[3 + i] * b[i]).sum::<f64>();
    let g1 = [y[0], y[1], y[2], 0.0, 0.0, 0.0];
    let g2 = [y[3], y[4], y[5], y[0], y[1], y[2]];
    let r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    canon(gf, gg) + (canon(gf, &g1) * canon(&g2, gg) - canon(gf, &g2) * canon(&g1, gg)) / r2
}

/// `{f, g}` on `T*S²` from finite-difference gradients, antisymmetrised so
/// that `{f, f} = 0` exactly.
pub fn bracket_fd(f: &dyn Fn(&[f64; 6]) -> f64, g: &dyn Fn(&[f64; 6]) -> f64, p: &PhasePoint) -> f64 {
    let y = p.to_array();
    let gf = fd_gradient(f, &y);
    let gg = fd_gradient(g, &y);
    0.5 * (dirac(&gf, &gg, &y) - dirac(&gg, &gf, &y))
}

/// `{J, H}` at `p` by finite differences.
pub fn poisson_bracket_fd(p: &PhasePoint, potential: &dyn Potential) -> f64 {
    bracket_fd(&ambient_j, &|y| ambient_h(y, potential), p)
}

/// `{J, J}`, zero by construction.
pub fn poisson_bracket_jj(p: &PhasePoint) -> f64 {
    bracket_fd(&ambient_j, &ambient_j, p)
}

/// Elliptic integral evaluated from its defining integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EllipticKind {
    F { gamma: f64, k: f64 },
    K { k: f64 },
    Pi { gamma: f64, n: f64, k: f64 },
    PiComplete { n: f64, k: f64 },
    Am { f: f64, k: f64 },
    Sn { f: f64, k: f64 },
}

fn reference_quad() -> QuadConfig {
    QuadConfig::with_tol(1e-15, 1e-14)
}

fn checked(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!("{what}: integrand is singular on the range")))
    }
}

fn quad_f(gamma: f64, k: f64) -> Result<f64> {
    if k * k >= 1.0 && gamma.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(Error::Domain(format!("F({gamma}, {k}) crosses the integrand pole")));
    }
    let v = integrate(|t| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt(), 0.0, gamma, reference_quad())?.value;
    checked(v, "F")
}

fn quad_pi(gamma: f64, n: f64, k: f64) -> Result<f64> {
    let s2max = if gamma.abs() >= std::f64::consts::FRAC_PI_2 { 1.0 } else { gamma.sin().powi(2) };
    if n * s2max >= 1.0 || k * k * s2max >= 1.0 {
        return Err(Error::Domain(format!("Π({gamma}, {n}, {k}) crosses a pole")));
    }
    let v = integrate(
        |t| {
            let s2 = t.sin().powi(2);
            1.0 / ((1.0 - n * s2) * (1.0 - k * k * s2).sqrt())
        },
        0.0,
        gamma,
        reference_quad(),
    )?
    .value;
    checked(v, "Π")
}

fn quad_am(f: f64, k: f64) -> Result<f64> {
    let quarter = quad_f(std::f64::consts::FRAC_PI_2, k)?;
    let m = (f / (2.0 * quarter)).round();
    let r = f - 2.0 * m * quarter;
    // Newton on F(γ) = r from the linear guess, with dF/dγ = 1/Δ
    let mut gamma = r * std::f64::consts::FRAC_PI_2 / quarter;
    for _ in 0..60 {
        let residual = quad_f(gamma, k)? - r;
        let delta = (1.0 - k * k * gamma.sin().powi(2)).sqrt();
        let next = gamma - residual * delta;
        if (next - gamma).abs() <= 1e-16 * gamma.abs().max(1.0) {
            gamma = next;
            break;
        }
        gamma = next;
    }
    Ok(gamma + m * std::f64::consts::PI)
}

pub fn quadrature_elliptic(kind: EllipticKind) -> Result<f64> {
    match kind {
        EllipticKind::F { gamma, k } => quad_f(gamma, k),
        EllipticKind::K { k } => quad_f(std::f64::consts::FRAC_PI_2, k),
        EllipticKind::Pi { gamma, n, k } => quad_pi(gamma, n, k),
        EllipticKind::PiComplete { n, k } => quad_pi(std::f64::consts::FRAC_PI_2, n, k),
        EllipticKind::Am { f, k } => quad_am(f, k),
        EllipticKind::Sn { f, k } => quad_am(f, k).map(f64::sin),
    }
}

/// Sampling window for random regular fibers: `j ∈ [−1.2, 1.2]`, `h ∈ [0.05, 2.2]`.
pub const FIBER_WINDOW: ([f64; 2], [f64; 2]) = ([-1.2, 1.2], [0.05, 2.2]);
/// Excluded distance from the boundary parabola and the focus-focus value.
pub const SINGULAR_MARGIN: f64 = 1e-3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform regular fibers in [`FIBER_WINDOW`] away from the singular strata.
pub fn random_regular_fibers(count: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut r = rng(seed);
    let ([j0, j1], [h0, h1]) = FIBER_WINDOW;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let j = r.gen_range(j0..j1);
        let h = r.gen_range(h0..h1);
        if h - 0.5 * j * j > SINGULAR_MARGIN
            && j.hypot(h - 1.0) > SINGULAR_MARGIN
            && classify(j, h) == Stratum::Regular
        {
            out.push((j, h));
        }
    }
    out
}

/// Points on `T*S²` with position uniform on the sphere and momentum
/// components uniform in `[−1.5, 1.5]` before projection.
pub fn random_constrained_points(count: usize, seed: u64) -> Vec<PhasePoint> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| loop {
            let v: [f64; 3] = [r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)];
            let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            if !(1e-4..=1.0).contains(&n2) {
                continue;
            }
            let mut y = [
                v[0],
                v[1],
                v[2],
                r.gen_range(-1.5..1.5),
                r.gen_range(-1.5..1.5),
                r.gen_range(-1.5..1.5),
                0.0,
                0.0,
            ];
            project_state(&mut y);
            break state_point(&y);
        })
        .collect()
}

/// A point on the fiber over `(j, h)`, reached from the section point by
/// uniform `t ∈ [0, T)` along `X_H` and uniform `s ∈ [0, 2π)` along `X_J`.
pub fn random_fiber_point(j: f64, h: f64, potential: &dyn Potential, r: &mut impl Rng) -> Result<PhasePoint> {
    let start = PhasePoint::section_point(j, h, potential)?;
    let flow = GeneralFlow::new(&start, potential)?;
    let t = r.gen_range(0.0..flow.band.period());
    let s = r.gen_range(0.0..TAU);
    Ok(flow.point_at(t)?.rotate(s))
}
