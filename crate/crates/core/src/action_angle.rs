//! Period lattice, actions and angles for `V(z) = z²`.
//!
//! The lattice of a regular fiber is generated by `(2π, 0)` and `(S, T)`:
//! `Φ_J^s ∘ Φ_H^t` is the identity on the fiber exactly for those `(s, t)`.
//! Angles are measured from the section point `(1, 0, 0, 0, j, ℓ)`.

use std::cell::Cell;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::dynamics_general::momentum_azimuth;
use crate::dynamics_quadratic::QuadraticFiberParams;
use crate::elliptic::{ellint_f, ellint_k, ellint_pi_complete};
use crate::error::{Error, Result};
use crate::phase_space::{classify, momentum_map, wrap_tau, PhasePoint, Quadratic, Stratum};
use crate::quadrature::{integrate, QuadConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodLattice {
    pub j: f64,
    pub h: f64,
    pub rank: u8,
    /// `(S, T)` on regular fibers, `None` on the boundary.
    pub periods: Option<(f64, f64)>,
}

impl PeriodLattice {
    /// Generators in units of `2π`: `(1, 0)` and, for rank 2, `(S/2π, T/2π)`.
    pub fn generators(&self) -> Vec<[f64; 2]> {
        let mut out = vec![[1.0, 0.0]];
        if let Some((s, t)) = self.periods {
            out.push([s / TAU, t / TAU]);
        }
        out
    }

    pub fn s(&self) -> Option<f64> {
        self.periods.map(|p| p.0)
    }

    pub fn t(&self) -> Option<f64> {
        self.periods.map(|p| p.1)
    }
}

/// `(S, T)` from the closed form; `S = 0` on the whole line `j = 0`.
///
/// Across `j = 0, h > 1` the continuous value of `S` jumps from `−2π`
/// to `2π`; all three representatives generate the same lattice.
pub fn quadratic_periods(params: &QuadraticFiberParams) -> Result<(f64, f64)> {
    let t = 4.0 * params.c * ellint_k(params.modulus)?;
    let s = if params.j == 0.0 {
        0.0
    } else {
        -4.0 * params.j * params.c * params.pi_complete()?
    };
    Ok((s, t))
}

pub fn period_generators(j: f64, h: f64) -> Result<PeriodLattice> {
    match classify(j, h) {
        Stratum::Regular => {
            let params = QuadraticFiberParams::new(j, h)?;
            Ok(PeriodLattice {
                j,
                h,
                rank: 2,
                periods: Some(quadratic_periods(&params)?),
            })
        }
        Stratum::EllipticBoundary => Ok(PeriodLattice {
            j,
            h,
            rank: 1,
            periods: None,
        }),
        stratum => Err(Error::Stratum {
            j,
            h,
            stratum,
            reason: "period lattice is undefined here",
        }),
    }
}

/// Published period formulas, transcribed literally for comparison.
pub mod published {
    use super::*;

    /// `(S, T)` with the parameter `k = (1 + h − D)/(1 + h + D)` used as the
    /// modulus and the time scale `2^{1/4} √(k³ℓ)`.
    pub fn general_formula(j: f64, h: f64) -> Result<(f64, f64)> {
        let p = QuadraticFiberParams::new(j, h)?;
        let scale = crate::dynamics_quadratic::published::time_scale(&p);
        let t = 4.0 * scale * ellint_k(p.k)?;
        let s = -4.0 * j * scale * ellint_pi_complete(p.k * p.ell / SQRT_2, p.k)?;
        Ok((s, t))
    }

    /// The separately listed `j = 0` lattices: `T = 4√(2h) K(√h)` below the
    /// focus-focus value and `T = 4√(2h) K(1/√h)` above it, with `S = 0`.
    pub fn special_case(j: f64, h: f64) -> Option<(f64, f64)> {
        if j != 0.0 || h <= 0.0 || h == 1.0 {
            return None;
        }
        let modulus = if h < 1.0 { h.sqrt() } else { 1.0 / h.sqrt() };
        ellint_k(modulus).ok().map(|k| (0.0, 4.0 * (2.0 * h).sqrt() * k))
    }
}

/// Point of the straight path from the focus-focus value `(0, 1)` to `(j, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub tau: f64,
    pub j_tau: f64,
    pub h_tau: f64,
    pub k_tau: f64,
    pub ell_tau: f64,
}

impl PathParams {
    pub fn new(j: f64, h: f64, tau: f64) -> Self {
        let j_tau = j * tau;
        let h_tau = 1.0 + (h - 1.0) * tau;
        let d = (1.0 - h_tau).hypot(SQRT_2 * j_tau);
        Self {
            tau,
            j_tau,
            h_tau,
            k_tau: (1.0 + h_tau - d) / (1.0 + h_tau + d),
            ell_tau: (2.0 * h_tau - j_tau * j_tau).max(0.0).sqrt(),
        }
    }
}

fn a2_quad_config() -> QuadConfig {
    QuadConfig {
        abs_tol: 1e-13,
        rel_tol: 1e-12,
        max_intervals: 4000,
    }
}

/// Second action, normalised to vanish at the focus-focus value.
///
/// Integrates `(S dJ + T dH)/2π` along `τ ↦ (jτ, 1 + (h − 1)τ)` with
/// `τ = u²`, which turns the logarithmic growth of `T` at `τ = 0` into a
/// continuous integrand.
pub fn action_a2(j: f64, h: f64) -> Result<f64> {
    MomentumValueCheck::regular(j, h)?;
    let failure: Cell<Option<Error>> = Cell::new(None);
    let integrand = |u: f64| {
        let path = PathParams::new(j, h, u * u);
        if classify(path.j_tau, path.h_tau) != Stratum::Regular {
            return 0.0;
        }
        let value = QuadraticFiberParams::new(path.j_tau, path.h_tau).and_then(|p| quadratic_periods(&p));
        match value {
            Ok((s, t)) => 2.0 * u * (s * j + t * (h - 1.0)) / TAU,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        }
    };
    let cfg = a2_quad_config();
    let est = integrate(integrand, 0.0, 1.0, cfg)?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let target = cfg.abs_tol.max(cfg.rel_tol * est.value.abs());
    if est.error > 1e-9_f64.max(target) {
        return Err(Error::QuadratureFailure {
            error: est.error,
            tolerance: 1e-9,
        });
    }
    Ok(est.value)
}

struct MomentumValueCheck;

impl MomentumValueCheck {
    fn regular(j: f64, h: f64) -> Result<()> {
        match classify(j, h) {
            Stratum::Regular => Ok(()),
            stratum => Err(Error::Stratum {
                j,
                h,
                stratum,
                reason: "actions and angles need a regular fiber",
            }),
        }
    }
}

/// Amplitude `γ ∈ (−π, π]` with `z = √a sin γ` and `w ∝ cos γ`.
fn full_amplitude(p: &PhasePoint, params: &QuadraticFiberParams) -> f64 {
    let sa = params.n.sqrt();
    let sin = p.z / sa;
    let delta = (1.0 - params.k * sin * sin).max(0.0).sqrt();
    sin.atan2(p.w * params.c / (sa * delta))
}

/// `arcsin(z/√a)`, evaluated through `atan2` so it stays accurate near
/// the turning points.
fn folded_amplitude(p: &PhasePoint, params: &QuadraticFiberParams) -> f64 {
    let g = full_amplitude(p, params);
    if g > FRAC_PI_2 {
        PI - g
    } else if g < -FRAC_PI_2 {
        -PI - g
    } else {
        g
    }
}

/// Reduce `(s, t)` by the lattice into `t ∈ [0, T)`, `s ∈ [0, 2π)`.
pub fn reduce_section_times(s: f64, t: f64, periods: (f64, f64)) -> (f64, f64) {
    let (big_s, big_t) = periods;
    let m = (t / big_t).floor();
    let mut t = t - m * big_t;
    if t >= big_t {
        t -= big_t;
    }
    (wrap_tau(s - m * big_s), t.max(0.0))
}

/// Horizontal direction of the vertical plane of a pole-passing orbit.
fn plane_azimuth(p: &PhasePoint, gamma: f64) -> f64 {
    let (s, c) = gamma.sin_cos();
    if c.abs() >= s.abs() {
        (p.y / c).atan2(p.x / c)
    } else {
        // at the poles the momentum carries the plane: (u, v) ∝ −sin γ · e
        (-p.v * s.signum()).atan2(-p.u * s.signum())
    }
}

/// Times `(s, t)` with `Φ_J^s ∘ Φ_H^t (1, 0, 0, 0, j, ℓ) = p`, reduced into
/// `[0, 2π) × [0, T)`.
pub fn section_times(p: &PhasePoint) -> Result<(f64, f64)> {
    let mv = momentum_map(p, &Quadratic);
    MomentumValueCheck::regular(mv.j, mv.h)?;
    let params = QuadraticFiberParams::new(mv.j, mv.h)?;
    let periods = quadratic_periods(&params)?;
    let gamma = full_amplitude(p, &params);
    let t = params.c * ellint_f(gamma, params.modulus)?;
    let s = if params.pole_passing() {
        plane_azimuth(p, gamma)
    } else if params.j == 0.0 {
        p.y.atan2(p.x)
    } else {
        p.y.atan2(p.x) - params.j * params.c * params.pi(gamma)?
    };
    Ok(reduce_section_times(s, t, periods))
}

/// `(α₁, α₂) = (s − S t/T, 2π t/T)` mod `2π`, from the case formulas
///
/// ```text
/// w ≥ 0:  α₁ = θ − jc (Π(γ) − F(γ) Π(n)/K),   α₂ = π/2 · F(γ)/K
/// w < 0:  α₁ = θ + jc (Π(γ) − F(γ) Π(n)/K),   α₂ = π − π/2 · F(γ)/K
/// ```
///
/// with `γ = arcsin(z/√a)` and `θ` the azimuth of `p`. On the pole-passing
/// fibers `θ` is the azimuth of the orbit plane, shifted by `π` for `w < 0`.
pub fn angles(p: &PhasePoint) -> Result<(f64, f64)> {
    let mv = momentum_map(p, &Quadratic);
    MomentumValueCheck::regular(mv.j, mv.h)?;
    let params = QuadraticFiberParams::new(mv.j, mv.h)?;
    let upward = p.w >= 0.0;
    let gamma = folded_amplitude(p, &params);
    let kk = ellint_k(params.modulus)?;
    let ratio = ellint_f(gamma, params.modulus)? / kk;
    let alpha2 = if upward {
        FRAC_PI_2 * ratio
    } else {
        PI - FRAC_PI_2 * ratio
    };
    let alpha1 = if params.pole_passing() {
        let full = full_amplitude(p, &params);
        plane_azimuth(p, full)
    } else if params.j == 0.0 {
        p.y.atan2(p.x)
    } else {
        let theta = p.y.atan2(p.x);
        let pi_c = params.pi_complete()?;
        let corr = params.j * params.c * (params.pi(gamma)? - ratio * pi_c);
        if upward {
            theta - corr
        } else {
            theta + corr
        }
    };
    Ok((wrap_tau(alpha1), wrap_tau(alpha2)))
}

/// Azimuth used for the angle origin at the poles: the momentum direction.
pub fn pole_azimuth(p: &PhasePoint) -> f64 {
    momentum_azimuth(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionAngleCoords {
    pub a1: f64,
    pub a2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

pub fn action_angle_coords(p: &PhasePoint) -> Result<ActionAngleCoords> {
    let mv = momentum_map(p, &Quadratic);
    let (alpha1, alpha2) = angles(p)?;
    Ok(ActionAngleCoords {
        a1: mv.j,
        a2: action_a2(mv.j, mv.h)?,
        alpha1,
        alpha2,
    })
}

/// Transition matrix of the period lattice after continuation around a loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monodromy {
    pub center: (f64, f64),
    pub radius: f64,
    pub steps: usize,
    /// `(S, T)` at the start and after one counter-clockwise turn.
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub matrix: [[f64; 2]; 2],
    pub integer: [[i64; 2]; 2],
}

/// Continue `(S, T)` counter-clockwise around a circle in the `(j, h)` plane.
///
/// `S` is only defined mod `2π`; at each step the representative nearest
/// to the previous value is kept. The matrix expresses the final basis
/// `{(1, 0), (S′/2π, T′/2π)}` in the initial one.
pub fn monodromy(center: (f64, f64), radius: f64, steps: usize) -> Result<Monodromy> {
    if steps < 8 {
        return Err(Error::Domain(format!("monodromy needs at least 8 steps, got {steps}")));
    }
    let at = |i: usize| {
        let phi = -FRAC_PI_2 + TAU * i as f64 / steps as f64;
        (center.0 + radius * phi.cos(), center.1 + radius * phi.sin())
    };
    let periods = |i: usize| -> Result<(f64, f64)> {
        let (j, h) = at(i);
        period_generators(j, h)?
            .periods
            .ok_or(Error::Stratum {
                j,
                h,
                stratum: classify(j, h),
                reason: "continuation loop must stay in the regular region",
            })
    };
    let start = periods(0)?;
    let mut current = start;
    for i in 1..=steps {
        let (s, t) = periods(i)?;
        let shift = ((current.0 - s) / TAU).round();
        current = (s + shift * TAU, t);
    }
    let b = [[1.0, start.0 / TAU], [0.0, start.1 / TAU]];
    let b2 = [[1.0, current.0 / TAU], [0.0, current.1 / TAU]];
    // B⁻¹ for the upper triangular B
    let inv = [[1.0, -b[0][1] / b[1][1]], [0.0, 1.0 / b[1][1]]];
    let mut matrix = [[0.0; 2]; 2];
    for (r, row) in matrix.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            *entry = inv[r][0] * b2[0][c] + inv[r][1] * b2[1][c];
        }
    }
    let integer = matrix.map(|row| row.map(|x| x.round() as i64));
    Ok(Monodromy {
        center,
        radius,
        steps,
        start,
        end: current,
        matrix,
        integer,
    })
}
