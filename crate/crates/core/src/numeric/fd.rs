//! Centered finite differences with one Richardson extrapolation level.

use crate::error::Error;

/// Step balancing truncation against round-off for centered differences.
pub fn default_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// First derivative: (4 D_{h/2} - D_h) / 3 with D the centered quotient.
pub fn derivative<F>(f: &F, x: f64, h: f64) -> Result<f64, Error>
where
    F: Fn(f64) -> Result<f64, Error>,
{
    let d = |h: f64| -> Result<f64, Error> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Second derivative via the centered three-point quotient, Richardson
/// extrapolated.
pub fn second_derivative<F>(f: &F, x: f64, h: f64) -> Result<f64, Error>
where
    F: Fn(f64) -> Result<f64, Error>,
{
    let d = |h: f64| -> Result<f64, Error> {
        Ok((f(x + h)? - 2.0 * f(x)? + f(x - h)?) / (h * h))
    };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}
