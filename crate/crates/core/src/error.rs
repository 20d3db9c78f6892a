//! Shared error type for the numerical and geometric layers.

use crate::expr::{EvalError, ParseError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    /// An integrand produced NaN or +/-inf inside a quadrature panel.
    #[error("non-finite integrand at s = {at}")]
    NonFiniteIntegrand { at: f64 },

    /// An integrand that must be non-negative dipped materially below zero.
    #[error("negative integrand near s = {at} (value {value})")]
    NegativeIntegrand { at: f64, value: f64 },

    /// Curve speed fell below the regularity floor.
    #[error("regularity failure: |c'({t})| = {speed} is below 1e-12")]
    RegularityFailure { t: f64, speed: f64 },

    /// A sampled point left the declared metric domain.
    #[error("point ({u}, {v}) left the metric domain")]
    DomainExit { u: f64, v: f64 },

    /// Metric positivity failed on the probe grid.
    #[error("metric not positive definite at ({u}, {v}): E = {e}, G = {g}, EG - F^2 = {det}")]
    MetricNotPositive { u: f64, v: f64, e: f64, g: f64, det: f64 },

    /// A conformal factor must stay positive on the probe grid.
    #[error("conformal factor is not positive at ({u}, {v}): {value}")]
    FactorNotPositive { u: f64, v: f64, value: f64 },

    /// mu (or a quantity that must stay positive) is at or below tolerance.
    #[error("mu({x}) = {value} is not positive")]
    MuNonPositive { x: f64, value: f64 },

    #[error("{0} is outside the declared domain")]
    OutsideDomain(f64),

    /// Surface spec violates a structural invariant (e.g. zeros of mu with
    /// non-compact fibers).
    #[error("inconsistent surface spec: {0}")]
    InconsistentSpec(String),

    /// Caller precondition failure (ordering of endpoints, bad parameter...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Euler-Maruyama step rejected: drift * dt too large for the interval.
    #[error("diffusion step too large: |drift| * dt = {value} exceeds (b - a)/10 = {limit}")]
    StepTooLarge { value: f64, limit: f64 },

    /// ODE integration could not proceed (step size underflow).
    #[error("ODE step size underflow at s = {s}")]
    StepUnderflow { s: f64 },

    /// Arc-length extension hit its step budget before the requested
    /// extent; callers treat the reached extent as the usable horizon.
    #[error("arc-length extension budget exhausted at s = {s}")]
    BudgetExhausted { s: f64 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
