use thiserror::Error;

use crate::phase_space::Stratum;

/// Errors raised by the numerical kernels and flows.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Argument outside the domain of an elliptic integral or Jacobi function.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("point outside the {chart} chart domain: {reason}")]
    ChartDomain { chart: &'static str, reason: String },

    /// The momentum value lies on a stratum the operation does not support.
    #[error("momentum value ({j}, {h}) lies on the {stratum} stratum: {reason}")]
    Stratum {
        j: f64,
        h: f64,
        stratum: Stratum,
        reason: &'static str,
    },

    #[error("branch exhausted: requested time {requested} exceeds {available} available before the next turning point")]
    BranchExhausted { requested: f64, available: f64 },

    #[error("initial radius {rho0} lies outside the classically allowed band of the fiber")]
    OutsideFiber { rho0: f64 },

    #[error("fiber ({j}, {h}) is within {band} of a singular stratum")]
    NearSingularFiber { j: f64, h: f64, band: f64 },

    #[error("quadrature did not converge: estimated error {error:e} exceeds tolerance {tolerance:e}")]
    QuadratureFailure { error: f64, tolerance: f64 },

    #[error("integrator step failure at t = {t}: step size {step:e} below minimum")]
    StepFailure { t: f64, step: f64 },

    #[error("no return to the Poincaré section within t = {limit}")]
    SectionMissed { limit: f64 },

    #[error("invalid potential: {0}")]
    InvalidPotential(String),
}

pub type Result<T> = std::result::Result<T, Error>;
