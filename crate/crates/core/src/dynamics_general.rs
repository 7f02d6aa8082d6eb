//! Flows of `J` and `H` for an arbitrary admissible potential, solved by
//! quadrature.
//!
//! On a regular fiber the height obeys `ż² = P(z)` with
//! `P(z) = 2(h − V(z))(1 − z²) − j²`, positive between two roots
//! `z₋ < 0 < z₊`. Writing `z = z_c + z_h sin ψ` removes both turning-point
//! singularities:
//!
//! ```text
//! dt/dψ = 1/√G,   dθ/dψ = j / ((1 − z²) √G),   G = P / ((z₊ − z)(z − z₋))
//! ```
//!
//! so a whole period is one smooth integral in `ψ ∈ [0, 2π]` and no chart
//! switching is needed. For `j = 0`, `h > V(±1)` the orbit runs over both poles;
//! there `z₊ = 1`, `z₋ = −1`, `G = 2(h − V)` and the motion stays in a fixed
//! vertical plane.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::phase_space::{
    classify, fmt17, momentum_map, wrap_tau, Chart, ChartPoint, PhasePoint, Potential, Stratum, STRATUM_BAND,
};
use crate::quadrature::{integrate_value, QuadConfig};

const KNOTS: usize = 32;
/// Relative distance to a root below which `G` is extrapolated rather than
/// evaluated as a 0/0 quotient.
const ROOT_GUARD: f64 = 1e-3;

fn quad_cfg() -> QuadConfig {
    QuadConfig::with_tol(1e-15, 1e-14)
}

fn one_minus_sq(z: f64) -> f64 {
    (1.0 - z) * (1.0 + z)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    // f(lo) > 0 ≥ f(hi); direction of the interval is irrelevant
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The `z`-band `[z₋, z₊]` of a regular fiber together with cumulative time and
/// azimuth tables over one `ψ`-period.
pub struct FiberBand<'a> {
    potential: &'a dyn Potential,
    pub j: f64,
    pub h: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    center: f64,
    half: f64,
    pole_passing: bool,
    tau_knots: Vec<f64>,
    theta_knots: Vec<f64>,
}

impl<'a> FiberBand<'a> {
    pub fn new(j: f64, h: f64, potential: &'a dyn Potential) -> Result<Self> {
        match classify(j, h) {
            Stratum::Regular => {}
            Stratum::EllipticBoundary => {
                return Err(Error::NearSingularFiber {
                    j,
                    h,
                    band: STRATUM_BAND,
                })
            }
            stratum => {
                return Err(Error::Stratum {
                    j,
                    h,
                    stratum,
                    reason: "flows by quadrature need a regular fiber",
                })
            }
        }
        let pole_passing = j == 0.0 && h > potential.value(1.0) && h > potential.value(-1.0);
        let (z_lo, z_hi) = if pole_passing {
            (-1.0, 1.0)
        } else if j == 0.0 {
            let f = |z: f64| h - potential.value(z);
            (bisect(0.0, -1.0, f), bisect(0.0, 1.0, f))
        } else {
            let p = |z: f64| 2.0 * (h - potential.value(z)) * one_minus_sq(z) - j * j;
            (bisect(0.0, -1.0, p), bisect(0.0, 1.0, p))
        };
        let mut band = Self {
            potential,
            j,
            h,
            z_lo,
            z_hi,
            center: 0.5 * (z_hi + z_lo),
            half: 0.5 * (z_hi - z_lo),
            pole_passing,
            tau_knots: vec![0.0],
            theta_knots: vec![0.0],
        };
        let step = TAU / KNOTS as f64;
        for k in 0..KNOTS {
            let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
            let dt = integrate_value(|psi| band.dt_dpsi(psi), a, b, quad_cfg())?;
            let dth = if j == 0.0 {
                0.0
            } else {
                integrate_value(|psi| band.dtheta_dpsi(psi), a, b, quad_cfg())?
            };
            band.tau_knots.push(band.tau_knots[k] + dt);
            band.theta_knots.push(band.theta_knots[k] + dth);
        }
        Ok(band)
    }

    fn p_value(&self, z: f64) -> f64 {
        2.0 * (self.h - self.potential.value(z)) * one_minus_sq(z) - self.j * self.j
    }

    fn g_direct(&self, z: f64) -> f64 {
        self.p_value(z) / ((self.z_hi - z) * (z - self.z_lo))
    }

    /// `G(z) = P(z) / ((z₊ − z)(z − z₋))`, smooth and positive on the band.
    pub fn g(&self, z: f64) -> f64 {
        if self.pole_passing {
            return 2.0 * (self.h - self.potential.value(z));
        }
        let d = ROOT_GUARD * self.half;
        let (root, dir) = if self.z_hi - z < d {
            (self.z_hi, -1.0)
        } else if z - self.z_lo < d {
            (self.z_lo, 1.0)
        } else {
            return self.g_direct(z);
        };
        // cubic extrapolation from nodes at distances d, 2d, 3d, 4d
        let s = (z - root).abs() / d;
        let nodes = [1.0, 2.0, 3.0, 4.0];
        let mut acc = 0.0;
        for (i, &xi) in nodes.iter().enumerate() {
            let mut weight = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m != i {
                    weight *= (s - xm) / (xi - xm);
                }
            }
            acc += weight * self.g_direct(root + dir * xi * d);
        }
        acc
    }

    pub fn z_of(&self, psi: f64) -> f64 {
        self.center + self.half * psi.sin()
    }

    fn dt_dpsi(&self, psi: f64) -> f64 {
        1.0 / self.g(self.z_of(psi)).sqrt()
    }

    fn dtheta_dpsi(&self, psi: f64) -> f64 {
        let z = self.z_of(psi);
        self.j / (one_minus_sq(z) * self.g(z).sqrt())
    }

    /// Return time `T` of the height oscillation.
    pub fn period(&self) -> f64 {
        self.tau_knots[KNOTS]
    }

    /// Azimuth gained over one height oscillation.
    pub fn theta_advance(&self) -> f64 {
        self.theta_knots[KNOTS]
    }

    /// Period-lattice generator `(S, T)`; `S = 0` on `j = 0`.
    pub fn periods(&self) -> (f64, f64) {
        (-self.theta_advance(), self.period())
    }

    fn cumulative(&self, knots: &[f64], psi: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        let m = (psi / TAU).floor();
        let r = psi - m * TAU;
        let step = TAU / KNOTS as f64;
        let k = ((r / step) as usize).min(KNOTS - 1);
        let a = k as f64 * step;
        Ok(m * knots[KNOTS] + knots[k] + integrate_value(f, a, r, quad_cfg())?)
    }

    /// Time `τ(ψ)` elapsed since phase 0.
    pub fn tau(&self, psi: f64) -> Result<f64> {
        self.cumulative(&self.tau_knots, psi, |x| self.dt_dpsi(x))
    }

    /// Azimuth `Θ(ψ)` gained since phase 0.
    pub fn big_theta(&self, psi: f64) -> Result<f64> {
        if self.j == 0.0 {
            return Ok(0.0);
        }
        self.cumulative(&self.theta_knots, psi, |x| self.dtheta_dpsi(x))
    }

    /// Inverse of [`Self::tau`] by safeguarded Newton iteration.
    pub fn psi_at(&self, tau: f64) -> Result<f64> {
        let period = self.period();
        let m = (tau / period).floor();
        let r = (tau - m * period).clamp(0.0, period);
        let k = self.tau_knots.partition_point(|&x| x <= r).clamp(1, KNOTS) - 1;
        let step = TAU / KNOTS as f64;
        let (mut lo, mut hi) = (k as f64 * step, (k + 1) as f64 * step);
        let base = self.tau_knots[k];
        let span = self.tau_knots[k + 1] - base;
        let mut psi = lo + step * ((r - base) / span).clamp(0.0, 1.0);
        for _ in 0..60 {
            let f = base + integrate_value(|x| self.dt_dpsi(x), lo.min(k as f64 * step), psi, quad_cfg())? - r;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = psi;
            } else {
                lo = psi;
            }
            let mut next = psi - f * self.g(self.z_of(psi)).sqrt();
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let moved = (next - psi).abs();
            psi = next;
            if moved <= 4.0 * f64::EPSILON * (1.0 + psi.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + psi.abs()) {
                break;
            }
        }
        Ok(psi + m * TAU)
    }

    fn g_at_psi(&self, psi: f64) -> f64 {
        self.g(self.z_of(psi))
    }
}

/// A point on the fiber parameterized by the height phase `ψ` and the
/// horizontal reference direction.
enum Horizontal {
    /// Azimuth `θ₀` at phase `ψ₀`, with `Θ(ψ₀)` subtracted.
    Azimuth { theta0: f64, big_theta0: f64 },
    /// Pole-passing orbit in the vertical plane spanned by `e_z` and `e`.
    Plane { e: [f64; 2] },
}

/// The `H`-flow through a fixed initial point, evaluated at arbitrary times.
pub struct GeneralFlow<'a> {
    pub band: FiberBand<'a>,
    psi0: f64,
    tau0: f64,
    horizontal: Horizontal,
}

impl<'a> GeneralFlow<'a> {
    pub fn new(p0: &PhasePoint, potential: &'a dyn Potential) -> Result<Self> {
        let mv = momentum_map(p0, potential);
        let band = FiberBand::new(mv.j, mv.h, potential)?;
        let g0 = band.g(p0.z.clamp(band.z_lo, band.z_hi));
        let sin0 = ((p0.z - band.center) / band.half).clamp(-1.0, 1.0);
        let cos0 = p0.w / (band.half * g0.sqrt());
        let psi0 = sin0.atan2(cos0);
        let tau0 = band.tau(psi0)?;
        let horizontal = if band.pole_passing {
            let (s, c) = psi0.sin_cos();
            let e = if c.abs() >= s.abs() {
                [p0.x / c, p0.y / c]
            } else {
                let scale = -s * g0.sqrt();
                [p0.u / scale, p0.v / scale]
            };
            let n = e[0].hypot(e[1]);
            Horizontal::Plane { e: [e[0] / n, e[1] / n] }
        } else {
            Horizontal::Azimuth {
                theta0: p0.y.atan2(p0.x),
                big_theta0: band.big_theta(psi0)?,
            }
        };
        Ok(Self {
            band,
            psi0,
            tau0,
            horizontal,
        })
    }

    /// Height phase `ψ(t)`.
    pub fn psi(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(self.psi0);
        }
        self.band.psi_at(self.tau0 + t)
    }

    /// Times `t > after` at which the orbit reaches a turning point `ż = 0`.
    pub fn next_turning_time(&self, after: f64) -> Result<f64> {
        let psi = self.psi(after)?;
        let next = ((psi - FRAC_PI_2) / PI).floor() * PI + FRAC_PI_2 + PI;
        Ok(self.band.tau(next)? - self.tau0)
    }

    pub fn point_at(&self, t: f64) -> Result<PhasePoint> {
        let psi = self.psi(t)?;
        let band = &self.band;
        let (s, c) = psi.sin_cos();
        let z = band.center + band.half * s;
        let rate = band.g_at_psi(psi).sqrt();
        let zdot = band.half * c * rate;
        Ok(match self.horizontal {
            Horizontal::Plane { e } => {
                PhasePoint::new(c * e[0], c * e[1], s, -s * rate * e[0], -s * rate * e[1], c * rate)
            }
            Horizontal::Azimuth { theta0, big_theta0 } => {
                let theta = theta0 + band.big_theta(psi)? - big_theta0;
                let rho = one_minus_sq(z).sqrt();
                let rho_dot = -z * zdot / rho;
                let tangential = band.j / rho;
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

    pub fn state_at(&self, t: f64) -> Result<FlowState> {
        Ok(FlowState::on_fiber(self.point_at(t)?, self.band.j, self.band.h))
    }
}

/// A point of the flow together with its fiber value and branch sign
/// `ε = sgn cos δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub point: PhasePoint,
    pub j: f64,
    pub h: f64,
    pub eps: i8,
}

/// `ε = sgn cos δ = −sgn(z w)`; on `z = 0` the value after the crossing
/// (`−1`), on `w = 0` the value after the turning point (`+1`).
pub fn branch_sign(p: &PhasePoint) -> i8 {
    let zw = p.z * p.w;
    if p.z == 0.0 {
        -1
    } else if p.w == 0.0 || zw < 0.0 {
        1
    } else {
        -1
    }
}

impl FlowState {
    pub fn from_point(point: PhasePoint, potential: &dyn Potential) -> Self {
        let mv = momentum_map(&point, potential);
        Self::on_fiber(point, mv.j, mv.h)
    }

    fn on_fiber(point: PhasePoint, j: f64, h: f64) -> Self {
        Self {
            point,
            j,
            h,
            eps: branch_sign(&point),
        }
    }

    pub fn from_chart(c: &ChartPoint, potential: &dyn Potential) -> Result<Self> {
        Ok(Self::from_point(crate::phase_space::from_chart(c)?, potential))
    }

    /// The North or South chart representation, depending on the sign of `z`.
    pub fn chart_point(&self) -> Result<ChartPoint> {
        crate::phase_space::hemisphere_chart(&self.point)
    }
}

/// `(X_J, X_H)` in North or South chart coordinates `(ρ, η, θ, φ)`.
pub fn vector_fields(c: &ChartPoint, potential: &dyn Potential) -> Result<([f64; 4], [f64; 4])> {
    c.check_domain()?;
    if c.chart == Chart::Equator {
        return Err(Error::ChartDomain {
            chart: "equator",
            reason: "no flow is formulated in the equator chart".into(),
        });
    }
    let [rho, eta, _, _] = c.coords;
    let (sd, cd) = c.delta().sin_cos();
    let one_m = one_minus_sq(rho);
    let vp = potential.profile_derivative(c.chart, rho);
    // eta_a = η·A with A the common bracket of the η and φ equations
    let eta_a = rho * eta * eta * (1.0 - rho * rho * sd * sd) / one_m + one_m * vp;
    let theta_dot = if rho > 0.0 {
        eta * sd / rho
    } else if eta * sd == 0.0 {
        0.0
    } else {
        return Err(Error::ChartDomain {
            chart: c.chart.name(),
            reason: "θ̇ undefined at ρ = 0".into(),
        });
    };
    let phi_dot = if eta > 0.0 {
        eta_a / eta * sd
    } else if one_m * vp * sd == 0.0 {
        0.0
    } else {
        return Err(Error::ChartDomain {
            chart: c.chart.name(),
            reason: "φ̇ undefined at η = 0".into(),
        });
    };
    Ok(([0.0, 0.0, 1.0, 1.0], [eta * cd, -eta_a * cd, theta_dot, phi_dot]))
}

/// Right-hand side `(ρ̇, η̇, θ̇, φ̇)` of Hamilton's equations for `H`.
pub fn rhs_h(c: &ChartPoint, potential: &dyn Potential) -> Result<[f64; 4]> {
    vector_fields(c, potential).map(|(_, xh)| xh)
}

/// `ρ(t)` on the North chart for a single monotone branch of sign `eps`.
pub fn r_eps(t: f64, rho0: f64, j: f64, h: f64, potential: &dyn Potential, eps: i8) -> Result<f64> {
    r_eps_in(Chart::North, t, rho0, j, h, potential, eps)
}

/// `ρ(t)` on the North or South chart for a single monotone branch.
///
/// Fails with `BranchExhausted` if `t` runs past the next turning point of
/// `ρ` (the band edge or the equator).
pub fn r_eps_in(chart: Chart, t: f64, rho0: f64, j: f64, h: f64, potential: &dyn Potential, eps: i8) -> Result<f64> {
    if chart == Chart::Equator {
        return Err(Error::ChartDomain {
            chart: "equator",
            reason: "ρ branches are defined on the hemisphere charts".into(),
        });
    }
    let band = FiberBand::new(j, h, potential)?;
    let sigma = if chart == Chart::South { -1.0 } else { 1.0 };
    if !(0.0..=1.0).contains(&rho0) {
        return Err(Error::OutsideFiber { rho0 });
    }
    let z0 = sigma * one_minus_sq(rho0).sqrt();
    if band.p_value(z0) < -1e-12 || z0 > band.z_hi + 1e-12 || z0 < band.z_lo - 1e-12 {
        return Err(Error::OutsideFiber { rho0 });
    }
    let s0 = ((z0 - band.center) / band.half).clamp(-1.0, 1.0);
    let psi_eq = (-band.center / band.half).clamp(-1.0, 1.0).asin();
    // ρ increases with |z| decreasing; cos ψ > 0 means z increasing
    let z_increasing = (eps > 0) == (sigma < 0.0);
    let (psi0, start, end) = match (sigma > 0.0, z_increasing) {
        (true, true) => (s0.asin(), psi_eq, FRAC_PI_2),
        (true, false) => (PI - s0.asin(), FRAC_PI_2, PI - psi_eq),
        (false, true) => (s0.asin(), -FRAC_PI_2, psi_eq),
        (false, false) => (PI - s0.asin(), PI - psi_eq, 3.0 * FRAC_PI_2),
    };
    let tau0 = band.tau(psi0)?;
    let available = if t >= 0.0 {
        band.tau(end)? - tau0
    } else {
        tau0 - band.tau(start)?
    };
    if t.abs() > available + 1e-12 {
        return Err(Error::BranchExhausted {
            requested: t,
            available: available.max(0.0),
        });
    }
    if t == 0.0 {
        return Ok(rho0);
    }
    let psi = band.psi_at(tau0 + t)?.clamp(start.min(psi0), end.max(psi0));
    Ok(one_minus_sq(band.z_of(psi)).sqrt())
}

/// Flow of `H` for time `t`.
pub fn flow_h(s0: &FlowState, t: f64, potential: &dyn Potential) -> Result<FlowState> {
    if t == 0.0 {
        return Ok(*s0);
    }
    GeneralFlow::new(&s0.point, potential)?.state_at(t)
}

/// Flow of `J` for time `s`: a rotation about the vertical axis.
pub fn flow_j(s0: &FlowState, s: f64) -> FlowState {
    FlowState {
        point: s0.point.rotate(s),
        ..*s0
    }
}

/// `Φ_J^s ∘ Φ_H^t`.
pub fn joint_flow(s0: &FlowState, s: f64, t: f64, potential: &dyn Potential) -> Result<FlowState> {
    Ok(flow_j(&flow_h(s0, t, potential)?, s))
}

/// Samples `Φ_H^t(p0)` at `samples` evenly spaced times in `[0, t_max]`.
pub fn trajectory(
    p0: &PhasePoint,
    potential: &dyn Potential,
    t_max: f64,
    samples: usize,
) -> Result<Vec<(f64, PhasePoint)>> {
    let times = sample_times(t_max, samples);
    if t_max == 0.0 {
        return Ok(vec![(0.0, *p0)]);
    }
    let flow = GeneralFlow::new(p0, potential)?;
    times.into_iter().map(|t| Ok((t, flow.point_at(t)?))).collect()
}

/// `samples` evenly spaced times in `[0, t_max]`; a single `0` if `t_max = 0`.
pub fn sample_times(t_max: f64, samples: usize) -> Vec<f64> {
    if t_max == 0.0 || samples <= 1 {
        return vec![0.0];
    }
    (0..samples)
        .map(|i| t_max * i as f64 / (samples - 1) as f64)
        .collect()
}

/// CSV with header `t,x,y,z,u,v,w,j,h`; `(j, h)` are recomputed per row.
pub fn trajectory_csv(rows: &[(f64, PhasePoint)], potential: &dyn Potential) -> String {
    let mut out = String::from("t,x,y,z,u,v,w,j,h\n");
    for (t, p) in rows {
        let mv = momentum_map(p, potential);
        out.push_str(&format!("{},{},{},{}\n", fmt17(*t), p.to_csv_row(), fmt17(mv.j), fmt17(mv.h)));
    }
    out
}

/// Azimuth of the horizontal momentum, the production value of `φ`.
pub fn momentum_azimuth(p: &PhasePoint) -> f64 {
    if p.u == 0.0 && p.v == 0.0 {
        0.0
    } else {
        wrap_tau(p.v.atan2(p.u))
    }
}
