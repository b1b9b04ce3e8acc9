use crate::num::pchip::PchipError;
use crate::num::quad::QuadError;
use crate::num::rk::RkError;
use crate::num::tridiag::TridiagError;

/// Unified error type for solver operations.
///
/// Variants carry enough context to diagnose the failure without a debugger:
/// offending times, thresholds, and best-effort partial results where the
/// underlying numeric routine produced one.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("span mismatch: {0}")]
    SpanMismatch(String),

    #[error("clock construction failed: {0}")]
    Clock(String),

    #[error("no closed form matches the scenario coefficients")]
    NoClosedForm,

    #[error("Riccati solution blew up at tau = {at}; reconstruction refused")]
    RiccatiBlowUp { at: f64 },

    #[error(
        "trajectory is not on shell: residual sup-norm {sup:e} exceeds the limit {limit:e}"
    )]
    OffShell { sup: f64, limit: f64 },

    #[error("Pinney witness collapsed: rho reached {threshold:e} at tau = {at}")]
    PinneyCollapse { at: f64, threshold: f64 },

    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),

    #[error("interpolation failed: {0}")]
    Interpolation(#[from] PchipError),

    #[error("tridiagonal solve failed: {0}")]
    Tridiagonal(#[from] TridiagError),

    #[error("ODE integration failed: {0}")]
    Ode(#[from] RkError),
}
