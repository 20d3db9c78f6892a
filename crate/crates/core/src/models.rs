//! Built-in ambient spaces and example curves, exposed as ready-to-classify
//! specs.
//!
//! The solvable geometry is handled through its translation-invariant
//! quotient: base metric e^{-2z} dy^2 + dz^2 on (y, z) with Killing length
//! e^z and non-compact orbits. The rotationally symmetric family over a
//! base of curvature kappa with bundle parameter tau uses the cylindrical
//! chart r > 0, 4 + kappa r^2 > 0 with base metric
//! 16 dr^2/(4+kappa r^2)^2 + dz^2/(1+r^2 tau^2) and compact orbits.

use crate::classify::{
    berger_report, classify_extrinsic, endpoint_integral, tail_integral, ClassificationReport,
    Policy, Route, Rule, TailReport, TailVerdict, Verdict, Witness,
};
use crate::error::Error;
use crate::expr::Expression;
use crate::geom::{Curve2D, Direction, Domain2D, Metric2D};
use crate::profile::FiberTopology;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelClass {
    Sol3,
    Ekt { kappa: f64, tau: f64 },
    Custom,
}

/// An ambient 3-manifold presented as a fibration over a 2D base: the base
/// metric, the fiber length mu over base coordinates, and the fiber
/// topology.
#[derive(Debug, Clone)]
pub struct AmbientModel {
    pub name: String,
    pub base: Metric2D,
    pub mu: Expression,
    pub fibers: FiberTopology,
    pub class: ModelClass,
    pub notes: Vec<String>,
}

/// Normalization constant for the rotational Killing length.
///
/// Deriving |-y dx + x dy| from the chart metric gives
/// 4 r sqrt(1 + r^2 tau^2) / (4 + kappa r^2); `AsPrinted` keeps the
/// constant 2 found in the source formulas instead. Verdicts are invariant
/// under constant rescaling of mu, so the choice only affects reported
/// magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MuConstant {
    #[default]
    FirstPrinciples,
    AsPrinted,
}

impl MuConstant {
    pub fn value(self) -> f64 {
        match self {
            MuConstant::FirstPrinciples => 4.0,
            MuConstant::AsPrinted => 2.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MuConstant::FirstPrinciples => "first-principles",
            MuConstant::AsPrinted => "as-printed",
        }
    }
}

fn parse_bind(src: &str, vars: &[&str], binds: &[(&str, f64)]) -> Expression {
    let mut all: Vec<&str> = vars.to_vec();
    all.extend(binds.iter().map(|(n, _)| *n));
    let mut e = Expression::parse(src, &all).expect("builtin formula parses");
    for (name, value) in binds {
        e = e.bind(name, *value).expect("bound parameter");
    }
    e
}

/// The translation-invariant quotient of the solvable geometry.
pub fn sol3_model() -> AmbientModel {
    let coords = ["y", "z"];
    let e = parse_bind("exp(-2*z)", &coords, &[]);
    let f = Expression::constant(0.0, &coords);
    let g = Expression::constant(1.0, &coords);
    let base = Metric2D::new(coords, e, f, g, Domain2D::all()).expect("sol3 base metric");
    AmbientModel {
        name: "sol3".into(),
        base,
        mu: parse_bind("exp(z)", &coords, &[]),
        fibers: FiberTopology::NonCompact,
        class: ModelClass::Sol3,
        notes: Vec::new(),
    }
}

/// Rotational model of the two-parameter homogeneous family; requires
/// kappa <= 0 (positive kappa short-circuits in the classifier).
pub fn ekt_model(kappa: f64, tau: f64, mu_constant: MuConstant) -> Result<AmbientModel, Error> {
    if kappa > 0.0 {
        return Err(Error::invalid(
            "rotational chart needs kappa <= 0; kappa > 0 is handled by the compact shortcut",
        ));
    }
    let coords = ["r", "z"];
    let binds: &[(&str, f64)] = &[("ka", kappa), ("ta", tau)];
    let e = parse_bind("16/(4 + ka*r^2)^2", &coords, binds);
    let f = Expression::constant(0.0, &coords);
    let g = parse_bind("1/(1 + r^2*ta^2)", &coords, binds);
    let domain = Domain2D {
        u_range: (0.0, f64::INFINITY),
        v_range: (f64::NEG_INFINITY, f64::INFINITY),
        constraint: Some(parse_bind("4 + ka*r^2", &coords, binds)),
    };
    let base = Metric2D::new(coords, e, f, g, domain)?;
    let c = mu_constant.value();
    let mu = parse_bind(
        "c0*r*sqrt(1 + r^2*ta^2)/(4 + ka*r^2)",
        &coords,
        &[("c0", c), ("ka", kappa), ("ta", tau)],
    );
    let mut notes = Vec::new();
    if mu_constant == MuConstant::AsPrinted {
        notes.push(
            "mu uses the as-printed constant 2; the chart metric itself gives 4 \
             (verdicts are unaffected, magnitudes differ by the factor 2)"
                .into(),
        );
    }
    Ok(AmbientModel {
        name: "ekt".into(),
        base,
        mu,
        fibers: FiberTopology::Compact,
        class: ModelClass::Ekt { kappa, tau },
        notes,
    })
}

/// Profile curve of the minimal translation-invariant family
/// S(theta0, a): s -> (a + e^{s sin theta0}, ln tan theta0 + s sin theta0).
/// Unit speed in the quotient base for every admissible theta0.
pub fn sol3_minimal_profile(theta0: f64, a: f64) -> Result<Curve2D, Error> {
    let tan = theta0.tan();
    if !(tan > 0.0) || !tan.is_finite() {
        return Err(Error::invalid(format!(
            "sol3 S-profile needs tan(theta0) > 0, got theta0 = {theta0}"
        )));
    }
    let sin = theta0.sin();
    let u = parse_bind("a0 + exp(t*s0)", &["t"], &[("a0", a), ("s0", sin)]);
    let v = parse_bind("l0 + t*s0", &["t"], &[("l0", tan.ln()), ("s0", sin)]);
    Curve2D::new(u, v, (f64::NEG_INFINITY, f64::INFINITY))
}

/// Leaf y = t of the horizontal foliation (hyperbolic-plane leaf).
pub fn sol3_leaf_q(t: f64) -> Curve2D {
    let u = parse_bind("y0", &["t"], &[("y0", t)]);
    let v = parse_bind("t", &["t"], &[]);
    Curve2D::new(u, v, (f64::NEG_INFINITY, f64::INFINITY)).expect("leaf curve")
}

/// Leaf z = t of the vertical foliation (Euclidean-plane leaf).
pub fn sol3_leaf_r(t: f64) -> Curve2D {
    let u = parse_bind("t", &["t"], &[]);
    let v = parse_bind("z0", &["t"], &[("z0", t)]);
    Curve2D::new(u, v, (f64::NEG_INFINITY, f64::INFINITY)).expect("leaf curve")
}

/// Synthetic constant-mean-curvature-type profile with bounded height:
/// (t, sin t). The bounded z-coordinate keeps mu = e^z bounded, which is
/// the parabolicity mechanism for the whole bounded-height family.
pub fn sol3_bounded_cmc_profile() -> Curve2D {
    Curve2D::parse("t", "sin(t)", (f64::NEG_INFINITY, f64::INFINITY)).expect("cmc profile")
}

/// Radial curve (t, 0) through the rotational chart, t in (0, inf).
pub fn umbrella_curve() -> Curve2D {
    Curve2D::parse("t", "0", (0.0, f64::INFINITY)).expect("umbrella curve")
}

/// Supported mean-curvature values for the rotational CMC family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenafielH {
    Zero,
    Half,
}

impl PenafielH {
    pub fn from_value(h: f64) -> Result<PenafielH, Error> {
        if h == 0.0 {
            Ok(PenafielH::Zero)
        } else if h == 0.5 {
            Ok(PenafielH::Half)
        } else {
            Err(Error::invalid(format!(
                "unsupported mean curvature H = {h}; supported values are 0 and 0.5"
            )))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            PenafielH::Zero => 0.0,
            PenafielH::Half => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PenafielParams {
    pub h: PenafielH,
    pub tau: f64,
    /// Integration constant of the height function; the classification is
    /// insensitive to it (profiles for different d differ by a bounded
    /// height shift), so the speed of the entire-graph representative is
    /// used.
    pub d: f64,
}

/// Conformal speed of the rotational CMC profile, as a closed form in the
/// curve parameter.
pub fn penafiel_conformal_speed(params: &PenafielParams) -> Result<Expression, Error> {
    if !(params.tau > 0.0) {
        return Err(Error::invalid("rotational CMC family needs tau > 0"));
    }
    let binds: &[(&str, f64)] = &[("ta", params.tau)];
    let speed = match params.h {
        PenafielH::Zero => parse_bind(
            "2*sqrt(1/(sinh(t)^2*(1 + ta^2*tanh(t/2))))",
            &["t"],
            binds,
        ),
        PenafielH::Half => parse_bind(
            "sqrt((5 + 3*cosh(t))^2*(1 - 4*ta^2 + cosh(t) + 4*ta^2*cosh(t))\
             /(8*(1 - ta^2 + (1 + ta^2)*cosh(t))^2) \
             + 4/(sinh(t)^2*(1 + 4*ta^2*tanh(t/2))))",
            &["t"],
            binds,
        ),
    };
    Ok(speed)
}

/// Classify the rotational CMC surface from its printed conformal speed:
/// the axis end (t -> 0) and the outer end (t -> inf) must both have
/// infinite conformal length for the surface to be parabolic.
pub fn classify_penafiel(
    params: &PenafielParams,
    policy: &Policy,
) -> Result<ClassificationReport, Error> {
    let speed_expr = penafiel_conformal_speed(params)?;
    let speed = move |t: f64| -> Result<f64, Error> {
        if t <= 0.0 {
            return Err(Error::OutsideDomain(t));
        }
        Ok(speed_expr.eval(&[t])?)
    };
    let t0 = 1.0;
    let axis = endpoint_integral(&speed, t0, 0.0, policy)?;
    let outer = tail_integral(&speed, t0, Direction::Plus, policy)?;
    let mut warnings: Vec<String> = Vec::new();
    if params.d != -2.0 * params.h.value() {
        warnings.push(format!(
            "d = {} changes the profile by a bounded height shift only; \
             classification uses the entire-graph speed",
            params.d
        ));
    }
    warnings.extend(axis.warnings.iter().cloned());
    warnings.extend(outer.warnings.iter().cloned());

    let tails = vec![
        TailReport { direction: Direction::Minus, detail: axis },
        TailReport { direction: Direction::Plus, detail: outer },
    ];
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
            bound: t.detail.finite_value.unwrap_or(f64::NAN),
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
        rule: Rule::CompactFiberTwoTails,
        tails,
        witness,
        warnings,
        policy: policy.clone(),
    })
}

/// Named built-in surfaces addressable from the CLI.
#[derive(Debug, Clone)]
pub enum Builtin {
    Sol3S { theta0: f64, a: f64 },
    Sol3Q { t: f64 },
    Sol3R { t: f64 },
    Sol3Cmc,
    EktUmbrella { kappa: f64, tau: f64, mu_constant: MuConstant },
    Penafiel(PenafielParams),
}

impl Builtin {
    /// Ambient model and curve for the geometric builtins. The rotational
    /// CMC family is speed-only and has no model-curve form.
    pub fn model_and_curve(&self) -> Result<(AmbientModel, Curve2D), Error> {
        match self {
            Builtin::Sol3S { theta0, a } => {
                Ok((sol3_model(), sol3_minimal_profile(*theta0, *a)?))
            }
            Builtin::Sol3Q { t } => Ok((sol3_model(), sol3_leaf_q(*t))),
            Builtin::Sol3R { t } => Ok((sol3_model(), sol3_leaf_r(*t))),
            Builtin::Sol3Cmc => Ok((sol3_model(), sol3_bounded_cmc_profile())),
            Builtin::EktUmbrella { kappa, tau, mu_constant } => {
                Ok((ekt_model(*kappa, *tau, *mu_constant)?, umbrella_curve()))
            }
            Builtin::Penafiel(_) => Err(Error::invalid(
                "the rotational CMC family is defined by its conformal speed, not a base curve",
            )),
        }
    }

    pub fn classify(&self, route: Route, policy: &Policy) -> Result<ClassificationReport, Error> {
        match self {
            Builtin::Sol3S { theta0, a } => {
                let model = sol3_model();
                let curve = sol3_minimal_profile(*theta0, *a)?;
                classify_extrinsic(&model, &curve, route, policy)
            }
            Builtin::Sol3Q { t } => {
                classify_extrinsic(&sol3_model(), &sol3_leaf_q(*t), route, policy)
            }
            Builtin::Sol3R { t } => {
                classify_extrinsic(&sol3_model(), &sol3_leaf_r(*t), route, policy)
            }
            Builtin::Sol3Cmc => {
                classify_extrinsic(&sol3_model(), &sol3_bounded_cmc_profile(), route, policy)
            }
            Builtin::EktUmbrella { kappa, tau, mu_constant } => {
                if *kappa > 0.0 {
                    return Ok(berger_report(*kappa, *tau, policy));
                }
                let model = ekt_model(*kappa, *tau, *mu_constant)?;
                classify_extrinsic(&model, &umbrella_curve(), route, policy)
            }
            Builtin::Penafiel(params) => classify_penafiel(params, policy),
        }
    }
}

/// Catalog for the `models` listing: (name, parameters, description).
pub fn builtin_catalog() -> Vec<(&'static str, &'static str, &'static str)> {
    vec![
        (
            "sol3:S",
            "--theta0 <rad> [--a <real>]",
            "minimal translation-invariant surface; needs tan(theta0) > 0",
        ),
        ("sol3:Q", "[--t <real>]", "hyperbolic-plane leaf y = t"),
        ("sol3:R", "[--t <real>]", "Euclidean-plane leaf z = t"),
        (
            "sol3:cmc",
            "",
            "synthetic bounded-height CMC-type profile (t, sin t)",
        ),
        (
            "ekt:umbrella",
            "--kappa <real> --tau <real> [--mu-constant first-principles|as-printed]",
            "radial disk (t, 0) in the rotational chart; kappa > 0 short-circuits",
        ),
        (
            "penafiel",
            "--H 0|0.5 --tau <positive> [--d <real>]",
            "rotational CMC surface classified from its printed conformal speed",
        ),
    ]
}
