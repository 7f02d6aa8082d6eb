//! Dormand–Prince 5(4) integration of the ambient equations
//!
//! ```text
//! ṙ = p,   ṗ = −V′(z) e_z + λ r,   λ = (V′(z) z − |p|²)/|r|²
//! ```
//!
//! with the constraints `|r| = 1`, `r·p = 0` restored by projection after
//! every accepted step. Two quadratures ride along: the azimuth
//! `θ̇ = j/(x² + y²)` and the kinetic integral `q̇ = |p|²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase_space::{PhasePoint, Potential};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-12,
            max_step: 0.25,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_step > 0.0) {
            return Err(Error::Domain(format!("integrator tolerances must be positive: {self:?}")));
        }
        Ok(())
    }
}

pub(crate) type State = [f64; 8];

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// The ambient system with its conserved `j` fixed for the azimuth rate.
pub(crate) struct Ambient<'a> {
    pub potential: &'a dyn Potential,
    pub j: f64,
}

impl Ambient<'_> {
    fn rhs(&self, y: &State) -> State {
        let [x, yy, z, u, v, w, _, _] = *y;
        let dv = self.potential.derivative(z);
        let r2 = x * x + yy * yy + z * z;
        let p2 = u * u + v * v + w * w;
        let lambda = (dv * z - p2) / r2;
        let rho2 = x * x + yy * yy;
        let theta_dot = if rho2 > 0.0 { self.j / rho2 } else { 0.0 };
        [u, v, w, lambda * x, lambda * yy, lambda * z - dv, theta_dot, p2]
    }

    /// One Dormand–Prince step; returns the fifth-order state and the
    /// embedded error vector.
    pub fn step(&self, y: &State, h: f64) -> (State, State) {
        let mut k = [[0.0; 8]; 7];
        k[0] = self.rhs(y);
        for s in 1..7 {
            let mut ys = *y;
            for (i, yi) in ys.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (r, kr) in k.iter().enumerate().take(s) {
                    acc += A[s][r] * kr[i];
                }
                *yi += h * acc;
            }
            k[s] = self.rhs(&ys);
        }
        let mut out = *y;
        let mut err = [0.0; 8];
        for i in 0..8 {
            let mut hi = 0.0;
            let mut lo = 0.0;
            for s in 0..7 {
                hi += B5[s] * k[s][i];
                lo += B4[s] * k[s][i];
            }
            out[i] += h * hi;
            err[i] = h * (hi - lo);
        }
        (out, err)
    }
}

pub(crate) fn project_state(y: &mut State) {
    let n = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    for v in y.iter_mut().take(3) {
        *v /= n;
    }
    let rp = y[0] * y[3] + y[1] * y[4] + y[2] * y[5];
    for i in 0..3 {
        y[3 + i] -= rp * y[i];
    }
}

pub(crate) fn initial_state(p: &PhasePoint) -> State {
    [p.x, p.y, p.z, p.u, p.v, p.w, 0.0, 0.0]
}

pub(crate) fn state_point(y: &State) -> PhasePoint {
    PhasePoint::new(y[0], y[1], y[2], y[3], y[4], y[5])
}

/// Adaptive stepper state.
pub(crate) struct Stepper<'a> {
    pub system: Ambient<'a>,
    pub cfg: IntegratorConfig,
    pub y: State,
    pub t: f64,
    h: f64,
    steps: usize,
    /// Sum of the absolute local error estimates of `z`.
    pub z_error: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(p: &PhasePoint, potential: &'a dyn Potential, cfg: IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let j = p.x * p.v - p.y * p.u;
        Ok(Self {
            system: Ambient { potential, j },
            cfg,
            y: initial_state(p),
            t: 0.0,
            h: 1e-3,
            steps: 0,
            z_error: 0.0,
        })
    }

    fn error_norm(&self, y_new: &State, err: &State) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..8 {
            let scale = self.cfg.abs_tol + self.cfg.rel_tol * self.y[i].abs().max(y_new[i].abs());
            worst = worst.max(err[i].abs() / scale);
        }
        worst
    }

    /// Take one accepted step of at most `limit` in the direction of its sign.
    pub fn advance(&mut self, limit: f64) -> Result<()> {
        let dir = limit.signum();
        loop {
            self.steps += 1;
            if self.steps > self.cfg.max_steps {
                return Err(Error::StepFailure { t: self.t, step: self.h });
            }
            let mut h = self.h.min(self.cfg.max_step);
            let clipped = h >= limit.abs();
            if clipped {
                h = limit.abs();
            }
            let (mut y_new, err) = self.system.step(&self.y, dir * h);
            let norm = self.error_norm(&y_new, &err);
            if !norm.is_finite() {
                self.h = h * 0.1;
                if self.h < 1e-14 {
                    return Err(Error::StepFailure { t: self.t, step: h });
                }
                continue;
            }
            let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            if norm <= 1.0 {
                project_state(&mut y_new);
                self.y = y_new;
                self.t += dir * h;
                self.z_error += err[2].abs();
                if !clipped || factor < 1.0 {
                    self.h = h * factor;
                }
                return Ok(());
            }
            self.h = h * factor;
            if self.h < 1e-14 {
                return Err(Error::StepFailure { t: self.t, step: h });
            }
        }
    }

    /// Integrate to exactly `t_end`.
    pub fn run_to(&mut self, t_end: f64) -> Result<()> {
        while self.t != t_end {
            let rest = t_end - self.t;
            if rest.abs() <= 1e-15 * t_end.abs().max(1.0) {
                self.t = t_end;
                break;
            }
            self.advance(rest)?;
        }
        Ok(())
    }

    pub fn point(&self) -> PhasePoint {
        state_point(&self.y)
    }
}

/// The oracle solution at time `t` (either sign).
pub fn integrate_reference(p: &PhasePoint, potential: &dyn Potential, t: f64, cfg: IntegratorConfig) -> Result<PhasePoint> {
    let mut stepper = Stepper::new(p, potential, cfg)?;
    stepper.run_to(t)?;
    Ok(stepper.point())
}

/// Oracle states at increasing sample times (the first may be 0).
pub fn integrate_samples(
    p: &PhasePoint,
    potential: &dyn Potential,
    times: &[f64],
    cfg: IntegratorConfig,
) -> Result<Vec<PhasePoint>> {
    let mut stepper = Stepper::new(p, potential, cfg)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if (t - stepper.t) * t < 0.0 {
            return Err(Error::Domain("sample times must move away from 0 monotonically".into()));
        }
        stepper.run_to(t)?;
        out.push(stepper.point());
    }
    Ok(out)
}
