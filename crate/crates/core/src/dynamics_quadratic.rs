//! Closed-form flows for `V(z) = z²` in terms of Jacobi functions and
//! third-kind elliptic integrals.
//!
//! With `D = √((1 − h)² + 2j²)` the height oscillates in `z² ≤ a`, where
//!
//! ```text
//! a = (1 + h − D)/2,   b = (1 + h + D)/2,   ab = ℓ²/2,
//! κ = √(a/b),          c = 1/√(2b),
//! z(t) = √a · sn(F(γ₀, κ) + t/c, κ)
//! ```
//!
//! The quotient `a/b` is stored as [`QuadraticFiberParams::k`]; it is the
//! square of the modulus `κ` that enters the elliptic integrals. The
//! characteristic of the azimuth integral is `n = κℓ/√2 = a`.

use std::f64::consts::SQRT_2;

use crate::dynamics_general::FlowState;
use crate::elliptic::{ellint_f, ellint_pi_complete_nc, ellint_pi_nc, jacobi_am};
use crate::error::{Error, Result};
use crate::phase_space::{
    classify, fmt17, from_chart, momentum_map, ChartPoint, PhasePoint, Quadratic, Stratum,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticFiberParams {
    pub j: f64,
    pub h: f64,
    /// `(1 + h − D)/(1 + h + D)`.
    pub k: f64,
    /// Elliptic modulus `κ = √k`.
    pub modulus: f64,
    /// `ℓ = √(2h − j²)`.
    pub ell: f64,
    /// Characteristic `n = κℓ/√2`, equal to the maximal `z²`.
    pub n: f64,
    /// `1 − n`, formed without cancellation.
    pub n_complement: f64,
    /// `b = (1 + h + D)/2`.
    pub b: f64,
    /// Time scale `c = 1/√(2b)`: `dt = c dγ / √(1 − κ² sin² γ)`.
    pub c: f64,
}

impl QuadraticFiberParams {
    pub fn new(j: f64, h: f64) -> Result<Self> {
        let stratum = classify(j, h);
        if stratum != Stratum::Regular {
            return Err(Error::Stratum {
                j,
                h,
                stratum,
                reason: "elliptic parameters need a regular fiber",
            });
        }
        let d = (1.0 - h).hypot(SQRT_2 * j);
        let b = 0.5 * (1.0 + h + d);
        let ell2 = 2.0 * h - j * j;
        // a = ℓ²/(2b) avoids the cancellation in 1 + h − D
        let a = ell2 / (2.0 * b);
        let k = a / b;
        // 1 − h + D, rewritten for h > 1 where it cancels
        let gap = if h > 1.0 {
            2.0 * j * j / (d + h - 1.0)
        } else {
            1.0 - h + d
        };
        Ok(Self {
            j,
            h,
            k,
            modulus: k.sqrt(),
            ell: ell2.sqrt(),
            n: a,
            n_complement: (gap + j * j) / (2.0 * b),
            b,
            c: 1.0 / (2.0 * b).sqrt(),
        })
    }

    /// `j = 0`, `h > 1`: the orbit passes over both poles (`a = 1`).
    pub fn pole_passing(&self) -> bool {
        self.j == 0.0 && self.h > 1.0
    }

    /// `Π(γ, n, κ)`.
    pub fn pi(&self, gamma: f64) -> Result<f64> {
        ellint_pi_nc(gamma, self.n, self.n_complement, self.modulus)
    }

    /// `Π(n, κ)`.
    pub fn pi_complete(&self) -> Result<f64> {
        ellint_pi_complete_nc(self.n, self.n_complement, self.modulus)
    }

    /// `γ = arcsin(z/√a)`, clamped within `1e-12` of the band edge.
    pub fn gamma_of_height(&self, z: f64) -> Result<f64> {
        let s = z / self.n.sqrt();
        if s.abs() > 1.0 + 1e-12 {
            return Err(Error::Domain(format!(
                "height {z} outside the band |z| ≤ {} of fiber ({}, {})",
                self.n.sqrt(),
                self.j,
                self.h
            )));
        }
        Ok(s.clamp(-1.0, 1.0).asin())
    }
}

pub fn fiber_params(j: f64, h: f64) -> Result<QuadraticFiberParams> {
    QuadraticFiberParams::new(j, h)
}

/// `ρ(t)` on the North chart from the initial radius `ρ₀` and branch sign.
///
/// The amplitude runs through turning points, so the result is valid for
/// all `t`; `eps` only fixes the initial direction.
pub fn r_eps_closed(t: f64, rho0: f64, params: &QuadraticFiberParams, eps: i8) -> Result<f64> {
    if t == 0.0 {
        return Ok(rho0);
    }
    let z0 = ((1.0 - rho0) * (1.0 + rho0)).max(0.0).sqrt();
    let gamma0 = params.gamma_of_height(z0)?;
    let f = ellint_f(gamma0, params.modulus)? - eps as f64 * t / params.c;
    let s = jacobi_am(f, params.modulus)?.sin();
    Ok((1.0 - params.n * s * s).max(0.0).sqrt())
}

enum Horizontal {
    Azimuth { theta0: f64, pi0: f64 },
    Plane { e: [f64; 2] },
}

/// Closed-form `H`-flow through a fixed initial point.
pub struct QuadraticFlow {
    pub params: QuadraticFiberParams,
    f0: f64,
    horizontal: Horizontal,
}

impl QuadraticFlow {
    pub fn new(p0: &PhasePoint) -> Result<Self> {
        let mv = momentum_map(p0, &Quadratic);
        let params = QuadraticFiberParams::new(mv.j, mv.h)?;
        let sa = params.n.sqrt();
        let sin0 = (p0.z / sa).clamp(-1.0, 1.0);
        let delta0 = (1.0 - params.k * sin0 * sin0).sqrt();
        let gamma0 = sin0.atan2(p0.w * params.c / (sa * delta0));
        let f0 = ellint_f(gamma0, params.modulus)?;
        let horizontal = if params.pole_passing() {
            let (s, c) = gamma0.sin_cos();
            let e = if c.abs() >= s.abs() {
                [p0.x / c, p0.y / c]
            } else {
                let scale = -s * delta0 / params.c;
                [p0.u / scale, p0.v / scale]
            };
            let n = e[0].hypot(e[1]);
            Horizontal::Plane { e: [e[0] / n, e[1] / n] }
        } else {
            let pi0 = if params.j == 0.0 {
                0.0
            } else {
                params.pi(gamma0)?
            };
            Horizontal::Azimuth {
                theta0: p0.y.atan2(p0.x),
                pi0,
            }
        };
        Ok(Self {
            params,
            f0,
            horizontal,
        })
    }

    /// Jacobi amplitude `γ(t) = am(F(γ₀, κ) + t/c, κ)`.
    pub fn gamma(&self, t: f64) -> Result<f64> {
        jacobi_am(self.f0 + t / self.params.c, self.params.modulus)
    }

    pub fn point_at(&self, t: f64) -> Result<PhasePoint> {
        let gamma = self.gamma(t)?;
        self.point_at_gamma(gamma)
    }

    pub fn state_at(&self, t: f64) -> Result<FlowState> {
        Ok(FlowState::from_point(self.point_at(t)?, &Quadratic))
    }

    fn point_at_gamma(&self, gamma: f64) -> Result<PhasePoint> {
        let p = &self.params;
        let (s, c) = gamma.sin_cos();
        let sa = p.n.sqrt();
        let delta = (1.0 - p.k * s * s).sqrt();
        let rate = delta / p.c;
        Ok(match self.horizontal {
            Horizontal::Plane { e } => {
                PhasePoint::new(c * e[0], c * e[1], s, -s * rate * e[0], -s * rate * e[1], c * rate)
            }
            Horizontal::Azimuth { theta0, pi0 } => {
                let z = sa * s;
                let zdot = sa * c * rate;
                let theta = if p.j == 0.0 {
                    theta0
                } else {
                    theta0 + p.j * p.c * (p.pi(gamma)? - pi0)
                };
                let rho = ((1.0 - z) * (1.0 + z)).sqrt();
                let rho_dot = -z * zdot / rho;
                let tangential = p.j / rho;
                let (st, ct) = theta.sin_cos();
                PhasePoint::new(
                    rho * ct,
                    rho * st,
                    z,
                    rho_dot * ct - tangential * st,
                    rho_dot * st + tangential * ct,
                    zdot,
                )
            }
        })
    }
}

/// `Φ_J^s ∘ Φ_H^t` applied to a chart point.
pub fn joint_flow_quadratic(init: &ChartPoint, s: f64, t: f64) -> Result<PhasePoint> {
    joint_flow_quadratic_point(&from_chart(init)?, s, t)
}

/// `Φ_J^s ∘ Φ_H^t` applied to a Cartesian point.
pub fn joint_flow_quadratic_point(p: &PhasePoint, s: f64, t: f64) -> Result<PhasePoint> {
    if t == 0.0 {
        return Ok(p.rotate(s));
    }
    Ok(QuadraticFlow::new(p)?.point_at(t)?.rotate(s))
}

/// `(ρ(t), θ(t))` along the orbit through `(1, 0, 0, 0, j, ℓ)`.
pub fn section_trajectory(j: f64, h: f64, t: f64) -> Result<(f64, f64)> {
    let p = QuadraticFiberParams::new(j, h)?;
    let gamma = jacobi_am(t / p.c, p.modulus)?;
    let s = gamma.sin();
    let rho = (1.0 - p.n * s * s).sqrt();
    let theta = if j == 0.0 {
        0.0
    } else {
        j * p.c * p.pi(gamma)?
    };
    Ok((rho, theta))
}

/// Samples of the closed-form flow with the amplitude `γ` at each time.
pub fn trajectory(p0: &PhasePoint, t_max: f64, samples: usize) -> Result<Vec<(f64, PhasePoint, f64)>> {
    let flow = QuadraticFlow::new(p0)?;
    crate::dynamics_general::sample_times(t_max, samples)
        .into_iter()
        .map(|t| {
            let gamma = flow.gamma(t)?;
            let point = if t == 0.0 { *p0 } else { flow.point_at_gamma(gamma)? };
            Ok((t, point, gamma))
        })
        .collect()
}

/// CSV with header `t,x,y,z,u,v,w,j,h,k,ell,gamma`.
pub fn trajectory_csv(rows: &[(f64, PhasePoint, f64)], params: &QuadraticFiberParams) -> String {
    let mut out = String::from("t,x,y,z,u,v,w,j,h,k,ell,gamma\n");
    for (t, p, gamma) in rows {
        let mv = momentum_map(p, &Quadratic);
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            fmt17(*t),
            p.to_csv_row(),
            fmt17(mv.j),
            fmt17(mv.h),
            fmt17(params.k),
            fmt17(params.ell),
            fmt17(*gamma)
        ));
    }
    out
}

/// Literal transcriptions of the published displays, kept for comparison.
pub mod published {
    use super::*;

    /// `2^{1/4} √(k³ ℓ)` with `k` taken from the fiber-parameter definition.
    pub fn time_scale(p: &QuadraticFiberParams) -> f64 {
        2f64.powf(0.25) * (p.k.powi(3) * p.ell).sqrt()
    }

    /// `η` display `√(j² + √2 h κℓ sin²γ − κ²ℓ² sin⁴γ)`, evaluated with the
    /// modulus `κ` in place of `k`.
    pub fn eta(p: &QuadraticFiberParams, gamma: f64) -> f64 {
        let s2 = gamma.sin().powi(2);
        let kl = p.modulus * p.ell;
        (p.j * p.j + SQRT_2 * p.h * kl * s2 - kl * kl * s2 * s2).sqrt()
    }

    /// The arcsin term of the `φ` display, with the modulus `κ` in place of `k`.
    pub fn phi_arcsin(p: &QuadraticFiberParams, gamma: f64) -> f64 {
        let s2 = gamma.sin().powi(2);
        let (k, l) = (p.modulus, p.ell);
        let inner = SQRT_2 * p.j * p.j + k * l.powi(3) * s2 - SQRT_2 * (1.0 + p.h) * k * k * l * l * s2 * s2
            + k.powi(3) * l.powi(3) * s2.powi(3);
        (2f64.powf(0.25) * p.j / inner.sqrt()).asin()
    }
}
