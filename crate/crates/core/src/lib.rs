//! Numerical library for the spherical pendulum `H = |p|²/2 + V(z)` on `T*S²`.
//!
//! * [`elliptic`]: Legendre integrals `F`, `K`, `Π` and the Jacobi amplitude.
//! * [`phase_space`]: points, charts, potentials, momentum map, strata.
//! * [`dynamics_general`]: flows of `J` and `H` for any admissible `V`.
//! * [`dynamics_quadratic`]: closed-form flows for `V(z) = z²`.
//! * [`action_angle`]: periods, actions and angles for `V(z) = z²`.
//! * [`oracle`]: independent reference integrator and verification report.

pub mod action_angle;
pub mod dynamics_general;
pub mod dynamics_quadratic;
pub mod elliptic;
pub mod error;
pub mod oracle;
pub mod phase_space;
pub mod quadrature;

pub use error::{Error, Result};
pub use phase_space::{Chart, ChartPoint, MomentumValue, PhasePoint, Potential, Quadratic, Stratum};
