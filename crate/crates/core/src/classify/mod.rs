//! The decision procedure: divergence detection on 1/mu plus the case
//! analysis over base topology, zeros of mu, and fiber topology.

mod extrinsic;
mod tail;

pub use extrinsic::{classify_extrinsic, ComposedMu, Route};
pub use tail::{
    detect_zeros, endpoint_integral, tail_integral, DivergenceVerdict, TailModel, TailVerdict,
    ZeroScan,
};

use crate::error::Error;
use crate::geom::Direction;
use crate::profile::{FiberTopology, MuProfile};
use tail::{windowed_bound_evidence, ScanKind};

/// Tunables of the divergence engine, surfaced through CLI flags and spec
/// files. Defaults implement the documented decision bands.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    /// First window half-extent w0; window k spans distance 2^k * w0.
    pub window_base: f64,
    /// Last window index.
    pub k_max: usize,
    /// Partial integral above this is deemed divergent.
    pub divergence_threshold: f64,
    /// Inconclusive band half-width around exponent 1.
    pub p_margin: f64,
    /// Relative Cauchy tolerance gating fit-based convergence.
    pub cauchy_rel: f64,
    /// Absolute increment floor: below this, convergent on its own.
    pub hard_cauchy_abs: f64,
    /// Max log-space RMS for a fit to count as decisive.
    pub fit_rms_tol: f64,
    /// Samples per window for tail fitting.
    pub fit_points: usize,
    /// Increments within this relative tolerance of non-decreasing count
    /// as log-growth (divergent).
    pub growth_ratio_tol: f64,
    /// Window quadrature tolerances.
    pub quad_rel_tol: f64,
    pub quad_abs_tol: f64,
    /// Grid size for zero scans.
    pub zero_scan_points: usize,
    /// Arc-length parameterization accuracy requirement.
    pub unit_speed_tol: f64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            window_base: 1.0,
            k_max: 40,
            divergence_threshold: 1e6,
            p_margin: 0.1,
            cauchy_rel: 1e-3,
            hard_cauchy_abs: 1e-12,
            fit_rms_tol: 0.15,
            fit_points: 16,
            growth_ratio_tol: 1e-3,
            quad_rel_tol: 1e-9,
            quad_abs_tol: 1e-12,
            zero_scan_points: 4096,
            unit_speed_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Parabolic,
    Hyperbolic,
    Inconclusive,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Parabolic => "parabolic",
            Verdict::Hyperbolic => "hyperbolic",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

/// Which case of the decision procedure produced the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    CompactCurve,
    CircleBase,
    CompactFiberTwoTails,
    LineBaseTwoTails,
    BoundedMuShortcut,
    BergerSphereShortcut,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::CompactCurve => "compact-curve",
            Rule::CircleBase => "circle-base",
            Rule::CompactFiberTwoTails => "compact-fiber-two-tails",
            Rule::LineBaseTwoTails => "line-base-two-tails",
            Rule::BoundedMuShortcut => "bounded-mu-shortcut",
            Rule::BergerSphereShortcut => "berger-sphere-shortcut",
        }
    }
}

/// Base manifold of the cross-section curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Base {
    Line,
    /// Circle of radius R (circumference 2 pi R).
    Circle { radius: f64 },
    /// Compact curve of the given total length.
    CompactCurve { length: f64 },
}

/// Intrinsic description of an invariant surface.
#[derive(Debug, Clone)]
pub struct SurfaceSpec {
    pub base: Base,
    pub mu: MuProfile,
    pub fibers: FiberTopology,
}

#[derive(Debug, Clone)]
pub struct TailReport {
    pub direction: Direction,
    pub detail: DivergenceVerdict,
}

/// Bounded harmonic witness data for a hyperbolic verdict: the convergent
/// tail and the finite value of the integral of 1/mu over it.
#[derive(Debug, Clone, Copy)]
pub struct Witness {
    pub direction: Direction,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    pub rule: Rule,
    pub tails: Vec<TailReport>,
    pub witness: Option<Witness>,
    pub warnings: Vec<String>,
    pub policy: Policy,
}

impl ClassificationReport {
    fn shortcut(verdict: Verdict, rule: Rule, warnings: Vec<String>, policy: &Policy) -> Self {
        ClassificationReport {
            verdict,
            rule,
            tails: Vec::new(),
            witness: None,
            warnings,
            policy: policy.clone(),
        }
    }
}

/// Ambient spaces fibering over a positively curved base are compact up to
/// quotient and bound mu, so every invariant surface in them is parabolic.
pub fn berger_report(kappa: f64, tau: f64, policy: &Policy) -> ClassificationReport {
    debug_assert!(kappa > 0.0);
    let _ = tau;
    ClassificationReport::shortcut(
        Verdict::Parabolic,
        Rule::BergerSphereShortcut,
        Vec::new(),
        policy,
    )
}

/// How one side of the profile domain ends.
#[derive(Debug, Clone)]
pub(crate) enum SideEnd {
    Infinite,
    /// mu -> 0 at a finite arc length: the surface closes up smoothly
    /// (axis point / puncture); no tail requirement.
    ZeroEnd,
    /// Finite end with mu bounded away from zero: completeness of the
    /// surface is not established; warned, no tail requirement.
    Boundary { note: String },
}

/// A profile classification problem shared by the intrinsic entry point
/// and the via-arc-length extrinsic route.
pub(crate) struct ProfileProblem<'a> {
    /// mu as a function of arc length.
    pub field: &'a dyn Fn(f64) -> Result<f64, Error>,
    pub anchor: f64,
    pub minus: SideEnd,
    pub plus: SideEnd,
    /// Interior zeros of mu (strictly between the ends).
    pub zeros: Vec<f64>,
    pub two_tails_rule: Rule,
}

pub(crate) fn classify_profile(
    problem: &ProfileProblem<'_>,
    policy: &Policy,
    mut warnings: Vec<String>,
) -> Result<ClassificationReport, Error> {
    for side in [&problem.minus, &problem.plus] {
        if let SideEnd::Boundary { note } = side {
            warnings.push(note.clone());
        }
    }

    let minus_inf = matches!(problem.minus, SideEnd::Infinite);
    let plus_inf = matches!(problem.plus, SideEnd::Infinite);

    if !minus_inf && !plus_inf {
        // compact cross-section
        return Ok(ClassificationReport::shortcut(
            Verdict::Parabolic,
            Rule::CompactCurve,
            warnings,
            policy,
        ));
    }

    // bounded-mu shortcut: sup evidence on every infinite side
    let mut bounded = true;
    for (dir, inf) in [(Direction::Minus, minus_inf), (Direction::Plus, plus_inf)] {
        if !inf {
            continue;
        }
        let sup =
            windowed_bound_evidence(&problem.field, problem.anchor, dir, ScanKind::SupBounded, policy)?;
        if sup.is_none() {
            bounded = false;
            break;
        }
    }
    if bounded {
        return Ok(ClassificationReport::shortcut(
            Verdict::Parabolic,
            Rule::BoundedMuShortcut,
            warnings,
            policy,
        ));
    }

    // tail anchors: outside an excised neighborhood of the zero set
    let (anchor_minus, anchor_plus) = if problem.zeros.is_empty() {
        (problem.anchor, problem.anchor)
    } else {
        let scale = profile_scale(problem, policy)?;
        let z_min = problem.zeros.iter().cloned().fold(f64::INFINITY, f64::min);
        let z_max = problem.zeros.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (
            excise(problem.field, z_min, Direction::Minus, scale)?,
            excise(problem.field, z_max, Direction::Plus, scale)?,
        )
    };

    let inv = |s: f64| -> Result<f64, Error> {
        let mu = (problem.field)(s)?;
        if mu <= 0.0 {
            return Err(Error::MuNonPositive { x: s, value: mu });
        }
        Ok(1.0 / mu)
    };

    let mut tails = Vec::new();
    if minus_inf {
        let detail = tail_integral(&inv, anchor_minus, Direction::Minus, policy)?;
        tails.push(TailReport { direction: Direction::Minus, detail });
    }
    if plus_inf {
        let detail = tail_integral(&inv, anchor_plus, Direction::Plus, policy)?;
        tails.push(TailReport { direction: Direction::Plus, detail });
    }

    for t in &tails {
        warnings.extend(t.detail.warnings.iter().cloned());
    }

    let convergent = tails
        .iter()
        .rev() // prefer the + tail for the witness
        .find(|t| t.detail.verdict == TailVerdict::Convergent);
    let verdict;
    let mut witness = None;
    if let Some(t) = convergent {
        verdict = Verdict::Hyperbolic;
        witness = Some(Witness {
            direction: t.direction,
            bound: t.detail.finite_value.unwrap_or_else(|| {
                t.detail.trace.last().map(|p| p.1).unwrap_or(f64::NAN)
            }),
        });
    } else if tails
        .iter()
        .any(|t| t.detail.verdict == TailVerdict::Inconclusive)
    {
        verdict = Verdict::Inconclusive;
    } else {
        verdict = Verdict::Parabolic;
    }

    let rule = problem.two_tails_rule;
    Ok(ClassificationReport {
        verdict,
        rule,
        tails,
        witness,
        warnings,
        policy: policy.clone(),
    })
}

/// Rough scale of mu near the anchor, for zero-excision thresholds.
fn profile_scale(problem: &ProfileProblem<'_>, policy: &Policy) -> Result<f64, Error> {
    let span = 64.0 * policy.window_base;
    let mut scale = 0.0f64;
    for i in 0..=256 {
        let s = problem.anchor - span + 2.0 * span * i as f64 / 256.0;
        if let Ok(v) = (problem.field)(s) {
            scale = scale.max(v.abs());
        }
    }
    if scale == 0.0 {
        return Err(Error::InconsistentSpec(
            "mu vanishes on the whole probed range".into(),
        ));
    }
    Ok(scale)
}

/// Walk away from a zero until mu clears the excision floor.
fn excise(
    field: &dyn Fn(f64) -> Result<f64, Error>,
    zero: f64,
    dir: Direction,
    scale: f64,
) -> Result<f64, Error> {
    let floor = 1e-8 * scale;
    let mut delta = 1e-6 * zero.abs().max(1.0);
    for _ in 0..80 {
        let s = zero + dir.sign() * delta;
        if (field)(s)? > floor {
            return Ok(s);
        }
        delta *= 2.0;
    }
    Err(Error::InconsistentSpec(format!(
        "mu stays below the excision floor on the {} side of its zero at {zero}",
        dir.symbol()
    )))
}

/// Anchor point for tail classification within a domain: 0 when it has
/// clearance from both ends, otherwise one window inside the finite end.
pub fn anchor_for(domain: (f64, f64), w0: f64) -> f64 {
    let (lo, hi) = domain;
    // 0 is the preferred anchor, but only with real clearance from the
    // ends (a boundary-hugging anchor sits where 1/mu may blow up)
    let margin = 1e-3 * w0;
    if lo + margin < 0.0 && hi - margin > 0.0 {
        0.0
    } else if lo.is_finite() && hi.is_finite() {
        0.5 * (lo + hi)
    } else if lo.is_finite() {
        lo + w0
    } else {
        hi - w0
    }
}

/// Decision procedure over an intrinsic surface spec.
///
/// In order: compact bases are parabolic outright; mu bounded above forces
/// both tails of 1/mu to diverge; with zeros of mu the fibers must be
/// compact and the infinite tails outside an excised zero neighborhood
/// decide; otherwise the two tails from the anchor decide. One convergent
/// tail certifies hyperbolicity and is reported with the witness bound.
pub fn classify_intrinsic(
    spec: &SurfaceSpec,
    policy: &Policy,
) -> Result<ClassificationReport, Error> {
    let mut warnings = Vec::new();
    let mu = &spec.mu;
    let (lo, hi) = mu.domain();

    match spec.base {
        Base::Circle { radius } => {
            if !(radius > 0.0) {
                return Err(Error::invalid("circle base needs a positive radius"));
            }
            let circumference = 2.0 * std::f64::consts::PI * radius;
            check_compact_cover(mu, circumference)?;
            let report = ClassificationReport::shortcut(
                Verdict::Parabolic,
                Rule::CircleBase,
                warnings,
                policy,
            );
            return Ok(report);
        }
        Base::CompactCurve { length } => {
            if !(length > 0.0) {
                return Err(Error::invalid("compact curve needs a positive length"));
            }
            check_compact_cover(mu, length)?;
            return Ok(ClassificationReport::shortcut(
                Verdict::Parabolic,
                Rule::CompactCurve,
                warnings,
                policy,
            ));
        }
        Base::Line => {}
    }

    // collect zeros: annotations plus a bounded scan for unannotated ones
    // (kept to a moderate range: fast-growing profiles overflow far out)
    let w0 = policy.window_base;
    let anchor = anchor_for((lo, hi), w0);
    let scan_lo = lo.max(anchor - 256.0 * w0);
    let scan_hi = hi.min(anchor + 256.0 * w0);
    let scan = detect_zeros(mu, (scan_lo, scan_hi), policy.zero_scan_points)?;
    warnings.extend(scan.warnings);
    let mut zeros: Vec<f64> = mu.zeros().to_vec();
    for z in &scan.zeros {
        if !zeros.iter().any(|y| (y - z).abs() <= 1e-6 * z.abs().max(1.0)) {
            warnings.push(format!("unannotated zero of mu detected at s = {z}"));
            zeros.push(*z);
        }
    }
    zeros.sort_by(f64::total_cmp);

    let mut fibers = spec.fibers;
    if !zeros.is_empty() {
        match fibers {
            FiberTopology::NonCompact => {
                return Err(Error::InconsistentSpec(
                    "mu has zeros but fibers are declared non-compact; \
                     orbits near a zero of the field are necessarily circles"
                        .into(),
                ))
            }
            FiberTopology::Unknown => {
                warnings.push(
                    "fibers inferred compact: orbits near a zero of mu are circles".into(),
                );
                fibers = FiberTopology::Compact;
            }
            FiberTopology::Compact => {}
        }
    }
    let _ = fibers;

    validate_nonnegative(mu, (scan_lo, scan_hi), &zeros)?;

    if lo.is_finite() && hi.is_finite() {
        // finite arc-length domain: compact cross-section
        for (end, name) in [(lo, "lower"), (hi, "upper")] {
            if !zeros.iter().any(|z| near(*z, end)) {
                warnings.push(format!(
                    "{name} domain end s = {end} is neither infinite nor a zero of mu; \
                     treating the cross-section as compact"
                ));
            }
        }
        return Ok(ClassificationReport::shortcut(
            Verdict::Parabolic,
            Rule::CompactCurve,
            warnings,
            policy,
        ));
    }

    let side = |endpoint: f64, zeros: &[f64]| -> SideEnd {
        if endpoint.is_infinite() {
            SideEnd::Infinite
        } else if zeros.iter().any(|z| near(*z, endpoint)) {
            SideEnd::ZeroEnd
        } else {
            SideEnd::Boundary {
                note: format!(
                    "domain end s = {endpoint} is neither infinite nor a zero of mu; \
                     surface completeness not established"
                ),
            }
        }
    };
    let minus = side(lo, &zeros);
    let plus = side(hi, &zeros);
    let interior: Vec<f64> = zeros
        .iter()
        .cloned()
        .filter(|z| !near(*z, lo) && !near(*z, hi))
        .collect();

    let rule = if zeros.is_empty() {
        Rule::LineBaseTwoTails
    } else {
        Rule::CompactFiberTwoTails
    };

    let field = |s: f64| mu.value(s);
    let problem = ProfileProblem {
        field: &field,
        anchor,
        minus,
        plus,
        zeros: interior,
        two_tails_rule: rule,
    };
    let mut report = classify_profile(&problem, policy, warnings)?;
    if mu.used_extrapolation() {
        report.warnings.push(
            "verdict relies on the fitted extension of mu beyond its sampled range".into(),
        );
    }
    Ok(report)
}

fn near(a: f64, b: f64) -> bool {
    if !a.is_finite() || !b.is_finite() {
        return false;
    }
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

fn check_compact_cover(mu: &MuProfile, needed: f64) -> Result<(), Error> {
    let (lo, hi) = mu.domain();
    let width = hi - lo;
    if width < needed * (1.0 - 1e-9) {
        return Err(Error::InconsistentSpec(format!(
            "mu domain width {width} does not cover the compact base (needs {needed})"
        )));
    }
    let start = if lo.is_finite() { lo } else { 0.0 };
    for i in 0..=512 {
        let s = start + needed * i as f64 / 512.0;
        let v = mu.value(s.min(hi))?;
        if !(v > 0.0) {
            return Err(Error::InconsistentSpec(format!(
                "mu({s}) = {v} must be positive on a compact base"
            )));
        }
    }
    Ok(())
}

fn validate_nonnegative(
    mu: &MuProfile,
    range: (f64, f64),
    zeros: &[f64],
) -> Result<(), Error> {
    let n = 1024;
    let mut scale = 0.0f64;
    let mut values = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let s = range.0 + (range.1 - range.0) * i as f64 / n as f64;
        let v = mu.value(s)?;
        values.push((s, v));
        scale = scale.max(v.abs());
    }
    for (s, v) in values {
        if v < -1e-9 * scale && !zeros.iter().any(|z| (s - z).abs() < (range.1 - range.0) / 64.0) {
            return Err(Error::InconsistentSpec(format!(
                "mu({s}) = {v} is negative; profiles must satisfy mu >= 0"
            )));
        }
    }
    Ok(())
}
