//! Shared numerical kernels: quadrature, ODE stepping, finite differences,
//! line fits, monotone interpolation.

pub mod fd;
pub mod fit;
pub mod ode;
pub mod pchip;
pub mod quad;

/// Default panel budget for adaptive quadrature.
pub const MAX_PANELS: usize = 20_000;
