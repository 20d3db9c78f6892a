//! Extrinsic classification of vertical cylinders over a base curve.
//!
//! Two equivalent routes are implemented and can be cross-checked:
//! (i) reparameterize the curve by base arc length, read off mu along it,
//! and classify the resulting profile; (ii) test completeness of the curve
//! in the conformally rescaled base metric g/mu^2 by integrating the
//! conformal speed toward both parameter ends.

use crate::error::Error;
use crate::expr::{BinOp, CompiledExpr, Expression};
use crate::geom::{
    conformal_scale, tangent_norm, ArcLengthCurve, Curve2D, Direction, Terminal, TerminalKind,
};
use crate::models::{AmbientModel, ModelClass};
use crate::profile::FiberTopology;

use super::tail::{
    endpoint_integral, tail_integral, windowed_bound_evidence, DivergenceVerdict, ScanKind,
    TailModel, TailVerdict,
};
use super::{
    anchor_for, berger_report, classify_profile, ClassificationReport, Policy, ProfileProblem,
    Rule, SideEnd, TailReport, Verdict, Witness,
};

/// Which classification route to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    /// Arc-length profile route.
    Intrinsic,
    /// Conformal-completeness route.
    Conformal,
    /// Run both and require agreement.
    #[default]
    Both,
}

/// First probe horizon: cheap, and far enough for the bounded-mu scan.
const STAGE1_EXP: i32 = 14;

/// mu along the arc-length reparameterization of a base curve, two-sided
/// around the anchor (s >= 0 on the Plus leg).
pub struct ComposedMu {
    plus: ArcLengthCurve,
    minus: ArcLengthCurve,
    curve: Curve2D,
    mu: CompiledExpr,
}

impl ComposedMu {
    pub fn new(model: &AmbientModel, curve: &Curve2D, t0: f64) -> Result<ComposedMu, Error> {
        Ok(ComposedMu {
            plus: ArcLengthCurve::new(curve.clone(), model.base.clone(), t0, Direction::Plus)?,
            minus: ArcLengthCurve::new(curve.clone(), model.base.clone(), t0, Direction::Minus)?,
            curve: curve.clone(),
            mu: model.mu.compile(),
        })
    }

    pub fn t_at(&self, s: f64) -> Result<f64, Error> {
        if s >= 0.0 {
            self.plus.t_at(s)
        } else {
            self.minus.t_at(-s)
        }
    }

    pub fn value(&self, s: f64) -> Result<f64, Error> {
        let t = self.t_at(s)?;
        let (u, v) = self.curve.point(t)?;
        Ok(self.mu.eval(&[u, v])?)
    }

    fn legs(&self) -> [&ArcLengthCurve; 2] {
        [&self.minus, &self.plus]
    }
}

/// Classify the surface over `curve` in the ambient model. Bases fibering
/// over positive curvature short-circuit to parabolic (bounded mu).
pub fn classify_extrinsic(
    model: &AmbientModel,
    curve: &Curve2D,
    route: Route,
    policy: &Policy,
) -> Result<ClassificationReport, Error> {
    if let ModelClass::Ekt { kappa, tau } = model.class {
        if kappa > 0.0 {
            return Ok(berger_report(kappa, tau, policy));
        }
    }
    match route {
        Route::Intrinsic => via_arclength(model, curve, policy),
        Route::Conformal => via_conformal(model, curve, policy),
        Route::Both => {
            let a = via_arclength(model, curve, policy)?;
            let b = via_conformal(model, curve, policy)?;
            if a.verdict == b.verdict {
                let mut merged = a;
                for w in b.warnings {
                    if !merged.warnings.contains(&w) {
                        merged.warnings.push(w);
                    }
                }
                Ok(merged)
            } else {
                let mut warnings = a.warnings.clone();
                warnings.push(format!(
                    "route disagreement: arc-length profile says {}, conformal completeness says {}",
                    a.verdict.name(),
                    b.verdict.name()
                ));
                warnings.extend(b.warnings);
                Ok(ClassificationReport {
                    verdict: Verdict::Inconclusive,
                    rule: a.rule,
                    tails: a.tails,
                    witness: None,
                    warnings,
                    policy: policy.clone(),
                })
            }
        }
    }
}

fn two_tails_rule(fibers: FiberTopology) -> Rule {
    match fibers {
        FiberTopology::Compact => Rule::CompactFiberTwoTails,
        _ => Rule::LineBaseTwoTails,
    }
}

fn probe(leg: &ArcLengthCurve, target: f64) -> Result<Option<Terminal>, Error> {
    match leg.probe_end(target) {
        Ok(t) => Ok(t),
        Err(Error::BudgetExhausted { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn side_end(
    model: &AmbientModel,
    curve: &Curve2D,
    term: &Terminal,
    mu_anchor: f64,
    sign: f64,
) -> SideEnd {
    let s_signed = sign * term.s;
    let mu_end = curve
        .point(term.t)
        .and_then(|(u, v)| Ok(model.mu.eval(&[u, v])?))
        .unwrap_or(0.0);
    let zero_floor = 1e-6 * mu_anchor.max(1e-12);
    match term.kind {
        TerminalKind::ParamBound | TerminalKind::DomainExit if mu_end <= zero_floor => {
            SideEnd::ZeroEnd
        }
        TerminalKind::RegularityFailure => SideEnd::Boundary {
            note: format!(
                "curve becomes irregular at arc length {s_signed:.6e} (t = {:.6e})",
                term.t
            ),
        },
        _ => SideEnd::Boundary {
            note: format!(
                "curve ends at finite arc length {s_signed:.6e} with mu = {mu_end:.3e}; \
                 surface completeness not established"
            ),
        },
    }
}

fn via_arclength(
    model: &AmbientModel,
    curve: &Curve2D,
    policy: &Policy,
) -> Result<ClassificationReport, Error> {
    let t0 = anchor_for(curve.t_range(), policy.window_base);
    let composed = ComposedMu::new(model, curve, t0)?;
    let (u0, v0) = curve.point(t0)?;
    let mu_anchor = model.mu.eval(&[u0, v0])?;

    let w0 = policy.window_base;
    let stage1 = w0 * (2.0f64).powi(STAGE1_EXP);
    let s_max = w0 * (2.0f64).powi(policy.k_max as i32) + w0;

    let mut ends: Vec<SideEnd> = Vec::with_capacity(2);
    let mut horizon_notes: Vec<String> = Vec::new();
    for (leg, dir) in composed.legs().into_iter().zip([Direction::Minus, Direction::Plus]) {
        let term = probe(leg, stage1)?;
        ends.push(match term {
            Some(t) if t.kind == TerminalKind::EvaluationHorizon => {
                horizon_notes.push(format!(
                    "evaluation overflow limits the {} side to arc length {:.3e}",
                    dir.symbol(),
                    t.s
                ));
                SideEnd::Infinite
            }
            Some(t) => side_end(model, curve, &t, mu_anchor, dir.sign()),
            None => SideEnd::Infinite,
        });
    }

    let field = |s: f64| composed.value(s);
    let rule = two_tails_rule(model.fibers);

    // cheap exits that do not need the far probe
    let both_finite = ends.iter().all(|e| !matches!(e, SideEnd::Infinite));
    let mut bounded = !both_finite;
    if !both_finite {
        for (end, dir) in ends.iter().zip([Direction::Minus, Direction::Plus]) {
            if !matches!(end, SideEnd::Infinite) {
                continue;
            }
            if windowed_bound_evidence(&field, 0.0, dir, ScanKind::SupBounded, policy)?.is_none() {
                bounded = false;
                break;
            }
        }
    }

    if !both_finite && !bounded {
        // full probe before tail integration
        for (i, leg) in composed.legs().into_iter().enumerate() {
            if matches!(ends[i], SideEnd::Infinite) {
                let dir = if i == 0 { Direction::Minus } else { Direction::Plus };
                match probe(leg, s_max)? {
                    Some(t) if t.kind == TerminalKind::EvaluationHorizon => {}
                    Some(t) => ends[i] = side_end(model, curve, &t, mu_anchor, dir.sign()),
                    None => {}
                }
            }
        }
    }

    let problem = ProfileProblem {
        field: &field,
        anchor: 0.0,
        minus: ends[0].clone(),
        plus: ends[1].clone(),
        zeros: Vec::new(),
        two_tails_rule: rule,
    };
    let mut report = classify_profile(&problem, policy, horizon_notes)?;
    // deviation only matters over the arc range the verdict consumed
    for (leg, dir) in composed.legs().into_iter().zip([Direction::Minus, Direction::Plus]) {
        let used = report
            .tails
            .iter()
            .filter(|t| t.direction == dir)
            .flat_map(|t| t.detail.trace.iter().map(|p| p.0.abs()))
            .fold(w0 * (2.0f64).powi(STAGE1_EXP.min(6)), f64::max);
        let dev = leg.max_unit_speed_deviation_upto(used);
        if dev > policy.unit_speed_tol {
            report.warnings.push(format!(
                "arc-length parameterization deviation {dev:.3e} over |s| <= {used:.3e} \
                 exceeds the unit-speed tolerance"
            ));
        }
    }
    Ok(report)
}

fn via_conformal(
    model: &AmbientModel,
    curve: &Curve2D,
    policy: &Policy,
) -> Result<ClassificationReport, Error> {
    let coords = model.base.coords();
    let one = Expression::constant(1.0, &coords);
    let factor = Expression::combine(BinOp::Div, &one, &model.mu);
    let conformal = conformal_scale(&model.base, &factor)?;

    let t0 = anchor_for(curve.t_range(), policy.window_base);
    let speed = |t: f64| tangent_norm(&conformal, curve, t);
    let (t_lo, t_hi) = curve.t_range();

    let mut tails: Vec<TailReport> = Vec::new();
    let mut warnings = Vec::new();
    for (bound, dir) in [(t_lo, Direction::Minus), (t_hi, Direction::Plus)] {
        let detail = if bound.is_infinite() {
            // conformal speed bounded below => this end already has
            // infinite length
            match windowed_bound_evidence(&speed, t0, dir, ScanKind::InfPositive, policy)? {
                Some(floor) => DivergenceVerdict {
                    verdict: TailVerdict::Divergent,
                    trace: Vec::new(),
                    model: TailModel::None,
                    window_reached: 0,
                    finite_value: None,
                    warnings: vec![format!(
                        "conformal speed bounded below by {floor:.3e}; end length is infinite"
                    )],
                },
                None => tail_integral(&speed, t0, dir, policy)?,
            }
        } else {
            endpoint_integral(&speed, t0, bound, policy)?
        };
        warnings.extend(detail.warnings.iter().cloned());
        tails.push(TailReport { direction: dir, detail });
    }

    let convergent = tails
        .iter()
        .rev()
        .find(|t| t.detail.verdict == TailVerdict::Convergent);
    let verdict;
    let mut witness = None;
    if let Some(t) = convergent {
        verdict = Verdict::Hyperbolic;
        witness = Some(Witness {
            direction: t.direction,
            bound: t
                .detail
                .finite_value
                .unwrap_or_else(|| t.detail.trace.last().map(|p| p.1).unwrap_or(f64::NAN)),
        });
    } else if tails
        .iter()
        .any(|t| t.detail.verdict == TailVerdict::Inconclusive)
    {
        verdict = Verdict::Inconclusive;
    } else {
        verdict = Verdict::Parabolic;
    }

    Ok(ClassificationReport {
        verdict,
        rule: two_tails_rule(model.fibers),
        tails,
        witness,
        warnings,
        policy: policy.clone(),
    })
}
