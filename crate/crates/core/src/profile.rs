//! The Killing-length profile `mu(s)`: the norm of the generating field
//! along an arc-length cross-section, as a closed-form expression or a
//! sampled table with monotone cubic interpolation.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};

use crate::error::Error;
use crate::expr::Expression;
use crate::numeric::fd;
use crate::numeric::fit::{fit_line, LineFit};
use crate::numeric::pchip::Pchip;

/// Topology of the orbits of the generating field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberTopology {
    Compact,
    NonCompact,
    Unknown,
}

/// Fitted extension used beyond the last samples of a table profile.
#[derive(Debug, Clone, Copy)]
enum TailExtension {
    /// mu ~ c * |s|^p
    Power { c: f64, p: f64 },
    /// mu ~ c * exp(rate * s)
    Exponential { c: f64, rate: f64 },
    /// no usable fit; hold the last sample
    Constant { value: f64 },
}

#[derive(Debug, Clone)]
enum Repr {
    Expr {
        expr: Expression,
        d1: Arc<OnceLock<Expression>>,
        d2: Arc<OnceLock<Expression>>,
    },
    Table {
        interp: Arc<Pchip>,
        lo_ext: TailExtension,
        hi_ext: TailExtension,
    },
}

/// Profile of the Killing length along the arc-length parameter.
#[derive(Debug, Clone)]
pub struct MuProfile {
    repr: Repr,
    domain: (f64, f64),
    zeros: Vec<f64>,
    /// Set when a table profile was evaluated beyond its samples.
    extrapolated: Arc<AtomicBool>,
}

impl MuProfile {
    /// Profile given by an expression in one variable over `domain`
    /// (either end may be infinite). `zeros` are the annotated zeros of mu.
    pub fn from_expression(
        expr: Expression,
        domain: (f64, f64),
        zeros: Vec<f64>,
    ) -> Result<MuProfile, Error> {
        if expr.vars().len() != 1 {
            return Err(Error::invalid(format!(
                "mu must be a function of one variable, got {:?}",
                expr.vars()
            )));
        }
        if !(domain.0 < domain.1) {
            return Err(Error::invalid("mu domain must be a non-empty interval"));
        }
        let mut zeros = zeros;
        zeros.sort_by(f64::total_cmp);
        Ok(MuProfile {
            repr: Repr::Expr {
                expr,
                d1: Arc::new(OnceLock::new()),
                d2: Arc::new(OnceLock::new()),
            },
            domain,
            zeros,
            extrapolated: Arc::new(AtomicBool::new(false)),
        })
    }

    /// Profile from samples (s_i, mu_i), strictly increasing in s.
    /// Beyond the samples, the profile is extended only by a tail model
    /// fitted to the trailing samples; any use of the extension is
    /// recorded and surfaced as a warning by the classifier.
    pub fn from_table(samples: &[(f64, f64)], zeros: Vec<f64>) -> Result<MuProfile, Error> {
        let interp = Pchip::new(samples)?;
        let lo_ext = fit_extension(samples, false);
        let hi_ext = fit_extension(samples, true);
        let domain = (f64::NEG_INFINITY, f64::INFINITY);
        let mut zeros = zeros;
        zeros.sort_by(f64::total_cmp);
        Ok(MuProfile {
            repr: Repr::Table {
                interp: Arc::new(interp),
                lo_ext,
                hi_ext,
            },
            domain,
            zeros,
            extrapolated: Arc::new(AtomicBool::new(false)),
        })
    }

    /// Constant profile, mostly for tests and sanity anchors.
    pub fn constant(value: f64) -> MuProfile {
        let expr = Expression::constant(value, &["s"]);
        MuProfile::from_expression(expr, (f64::NEG_INFINITY, f64::INFINITY), Vec::new())
            .expect("constant profile")
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    pub fn with_zeros(mut self, zeros: Vec<f64>) -> MuProfile {
        self.zeros = zeros;
        self.zeros.sort_by(f64::total_cmp);
        self
    }

    pub fn with_domain(mut self, domain: (f64, f64)) -> MuProfile {
        self.domain = domain;
        self
    }

    /// True if any evaluation so far used the fitted table extension.
    pub fn used_extrapolation(&self) -> bool {
        self.extrapolated.load(Ordering::Relaxed)
    }

    pub fn is_table(&self) -> bool {
        matches!(self.repr, Repr::Table { .. })
    }

    /// The sampled range for table profiles.
    pub fn table_range(&self) -> Option<(f64, f64)> {
        match &self.repr {
            Repr::Table { interp, .. } => Some((interp.x_min(), interp.x_max())),
            _ => None,
        }
    }

    pub fn value(&self, s: f64) -> Result<f64, Error> {
        if s < self.domain.0 || s > self.domain.1 {
            return Err(Error::OutsideDomain(s));
        }
        match &self.repr {
            Repr::Expr { expr, .. } => Ok(expr.eval(&[s])?),
            Repr::Table { interp, lo_ext, hi_ext } => {
                if s < interp.x_min() {
                    self.extrapolated.store(true, Ordering::Relaxed);
                    Ok(eval_extension(lo_ext, s))
                } else if s > interp.x_max() {
                    self.extrapolated.store(true, Ordering::Relaxed);
                    Ok(eval_extension(hi_ext, s))
                } else {
                    Ok(interp.value(s))
                }
            }
        }
    }

    /// mu'(s): symbolic for expressions, interpolant derivative for tables.
    pub fn derivative(&self, s: f64) -> Result<f64, Error> {
        match &self.repr {
            Repr::Expr { expr, d1, .. } => {
                let d = d1.get_or_init(|| {
                    expr.differentiate(&expr.vars()[0].clone())
                        .expect("declared variable")
                });
                Ok(d.eval(&[s])?)
            }
            Repr::Table { interp, .. } => {
                if s < interp.x_min() || s > interp.x_max() {
                    self.extrapolated.store(true, Ordering::Relaxed);
                    let h = fd::default_step(s);
                    return fd::derivative(&|x| self.value(x), s, h);
                }
                Ok(interp.derivative(s))
            }
        }
    }

    /// mu''(s): symbolic when possible, otherwise centered differences with
    /// Richardson extrapolation (the table interpolant is only C1, so the
    /// finite-difference answer is data-limited).
    pub fn second_derivative(&self, s: f64) -> Result<f64, Error> {
        match &self.repr {
            Repr::Expr { expr, d1, d2 } => {
                let first = d1.get_or_init(|| {
                    expr.differentiate(&expr.vars()[0].clone())
                        .expect("declared variable")
                });
                let second = d2.get_or_init(|| {
                    first
                        .differentiate(&first.vars()[0].clone())
                        .expect("declared variable")
                });
                Ok(second.eval(&[s])?)
            }
            Repr::Table { .. } => {
                let h = fd::default_step(s);
                fd::second_derivative(&|x| self.value(x), s, h)
            }
        }
    }

    /// Compiled drift mu'/(2 mu) for the diffusion oracle, specialized per
    /// representation so the hot loop avoids tree walks.
    pub fn drift(&self) -> Result<DriftField, Error> {
        match &self.repr {
            Repr::Expr { expr, .. } => {
                let var = expr.vars()[0].clone();
                let d = expr.differentiate(&var)?;
                let two_mu = Expression::combine(
                    crate::expr::BinOp::Mul,
                    &Expression::constant(2.0, &[&var]),
                    expr,
                );
                let drift = Expression::combine(crate::expr::BinOp::Div, &d, &two_mu);
                Ok(DriftField::Compiled(drift.compile()))
            }
            Repr::Table { .. } => Ok(DriftField::Profile(self.clone())),
        }
    }
}

/// Drift evaluator for the radial diffusion.
pub enum DriftField {
    Compiled(crate::expr::CompiledExpr),
    Profile(MuProfile),
}

impl DriftField {
    pub fn eval(&self, x: f64, stack: &mut Vec<f64>) -> Result<f64, Error> {
        match self {
            DriftField::Compiled(c) => Ok(c.eval_with(&[x], stack)?),
            DriftField::Profile(p) => {
                let mu = p.value(x)?;
                if mu <= 0.0 {
                    return Err(Error::MuNonPositive { x, value: mu });
                }
                Ok(p.derivative(x)? / (2.0 * mu))
            }
        }
    }
}

fn eval_extension(ext: &TailExtension, s: f64) -> f64 {
    match ext {
        TailExtension::Power { c, p } => c * s.abs().powf(*p),
        TailExtension::Exponential { c, rate } => c * (rate * s).exp(),
        TailExtension::Constant { value } => *value,
    }
}

/// Fit a power/exponential tail model to the trailing quarter (at least 4,
/// at most 32) of the samples on one side.
fn fit_extension(samples: &[(f64, f64)], upper: bool) -> TailExtension {
    let n = samples.len();
    let take = (n / 4).clamp(4, 32).min(n);
    let window: Vec<(f64, f64)> = if upper {
        samples[n - take..].to_vec()
    } else {
        samples[..take].to_vec()
    };
    let last = if upper { samples[n - 1].1 } else { samples[0].1 };
    let fallback = TailExtension::Constant { value: last };

    let positive: Vec<(f64, f64)> = window
        .iter()
        .copied()
        .filter(|(s, mu)| *mu > 0.0 && s.abs() > 0.0)
        .collect();
    if positive.len() < 4 {
        return fallback;
    }
    let log_mu: Vec<f64> = positive.iter().map(|(_, mu)| mu.ln()).collect();
    let log_s: Vec<f64> = positive.iter().map(|(s, _)| s.abs().ln()).collect();
    let s_raw: Vec<f64> = positive.iter().map(|(s, _)| *s).collect();

    let pow: Option<LineFit> = fit_line(&log_s, &log_mu);
    let exp: Option<LineFit> = fit_line(&s_raw, &log_mu);
    match (pow, exp) {
        (Some(p), Some(e)) if p.rms <= e.rms => TailExtension::Power {
            c: p.intercept.exp(),
            p: p.slope,
        },
        (_, Some(e)) => TailExtension::Exponential {
            c: e.intercept.exp(),
            rate: e.slope,
        },
        (Some(p), None) => TailExtension::Power {
            c: p.intercept.exp(),
            p: p.slope,
        },
        (None, None) => fallback,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr_profile(src: &str) -> MuProfile {
        let e = Expression::parse(src, &["s"]).unwrap();
        MuProfile::from_expression(e, (f64::NEG_INFINITY, f64::INFINITY), vec![]).unwrap()
    }

    #[test]
    fn expression_profile_derivatives() {
        let p = expr_profile("exp(s)");
        assert!((p.value(0.7).unwrap() - 0.7f64.exp()).abs() < 1e-14);
        assert!((p.derivative(0.7).unwrap() - 0.7f64.exp()).abs() < 1e-14);
        assert!((p.second_derivative(0.7).unwrap() - 0.7f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn table_profile_tracks_samples_and_extends() {
        let samples: Vec<(f64, f64)> = (0..64)
            .map(|i| {
                let s = i as f64 * 0.25;
                (s, (1.0 + s * s).sqrt())
            })
            .collect();
        let p = MuProfile::from_table(&samples, vec![]).unwrap();
        assert!((p.value(3.1).unwrap() - (1.0f64 + 3.1 * 3.1).sqrt()).abs() < 1e-3);
        assert!(!p.used_extrapolation());
        // beyond the last sample: power tail ~ s
        let far = p.value(100.0).unwrap();
        assert!(p.used_extrapolation());
        assert!((far - 100.0).abs() / 100.0 < 0.05, "extension gave {far}");
    }

    #[test]
    fn domain_is_enforced() {
        let e = Expression::parse("s", &["s"]).unwrap();
        let p = MuProfile::from_expression(e, (0.0, 10.0), vec![]).unwrap();
        assert!(matches!(p.value(-1.0), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn drift_matches_closed_form() {
        let p = expr_profile("exp(s)");
        let drift = p.drift().unwrap();
        let mut stack = Vec::new();
        // mu'/(2 mu) = 1/2 for exp
        assert!((drift.eval(1.3, &mut stack).unwrap() - 0.5).abs() < 1e-14);
        let q = expr_profile("s");
        let drift_q = q.drift().unwrap();
        assert!((drift_q.eval(2.0, &mut stack).unwrap() - 0.25).abs() < 1e-14);
    }
}
