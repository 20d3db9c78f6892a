//! JSON spec files: an intrinsic profile spec or an extrinsic
//! model-plus-curve spec, with optional policy overrides. Documented in
//! `docs/spec-file.md`.

use serde::Deserialize;

use kparab::classify::{Base, Policy, SurfaceSpec};
use kparab::geom::{Curve2D, Domain2D, Metric2D};
use kparab::models::{ekt_model, sol3_model, AmbientModel, ModelClass, MuConstant};
use kparab::profile::FiberTopology;
use kparab::{Expression, MuProfile};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub intrinsic: Option<IntrinsicSpec>,
    pub extrinsic: Option<ExtrinsicSpec>,
    pub policy: Option<PolicyOverride>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicSpec {
    pub base: BaseSpec,
    pub mu: MuSpec,
    pub fibers: FibersSpec,
    #[serde(default)]
    pub zeros: Vec<f64>,
    pub domain: Option<[RangeVal; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BaseSpec {
    Named(String),
    Circle { circle: f64 },
    Compact { compact: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum MuSpec {
    Formula(String),
    Table { table: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub enum FibersSpec {
    #[serde(rename = "compact")]
    Compact,
    #[serde(rename = "noncompact")]
    NonCompact,
    #[serde(rename = "unknown")]
    Unknown,
}

impl From<FibersSpec> for FiberTopology {
    fn from(f: FibersSpec) -> FiberTopology {
        match f {
            FibersSpec::Compact => FiberTopology::Compact,
            FibersSpec::NonCompact => FiberTopology::NonCompact,
            FibersSpec::Unknown => FiberTopology::Unknown,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtrinsicSpec {
    pub model: ModelSpec,
    pub curve: CurveSpec,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Named(String),
    Ekt { ekt: EktSpec },
    Custom { custom: CustomSpec },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EktSpec {
    pub kappa: f64,
    pub tau: f64,
    pub mu_constant: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSpec {
    pub coords: [String; 2],
    #[serde(rename = "E")]
    pub e: String,
    #[serde(rename = "F", default = "zero_expr")]
    pub f: String,
    #[serde(rename = "G")]
    pub g: String,
    pub mu: String,
    pub domain: Option<DomainSpec>,
    pub fibers: FibersSpec,
}

fn zero_expr() -> String {
    "0".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub u: Option<[RangeVal; 2]>,
    pub v: Option<[RangeVal; 2]>,
    pub constraint: Option<String>,
}

/// A finite number or the sentinels "inf" / "-inf".
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum RangeVal {
    Number(f64),
    Sentinel(InfSentinel),
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub enum InfSentinel {
    #[serde(rename = "inf")]
    PlusInf,
    #[serde(rename = "-inf")]
    MinusInf,
}

impl RangeVal {
    pub fn value(self) -> f64 {
        match self {
            RangeVal::Number(x) => x,
            RangeVal::Sentinel(InfSentinel::PlusInf) => f64::INFINITY,
            RangeVal::Sentinel(InfSentinel::MinusInf) => f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyOverride {
    pub window_base: Option<f64>,
    pub k_max: Option<usize>,
    pub divergence_threshold: Option<f64>,
    pub p_margin: Option<f64>,
    pub cauchy_rel: Option<f64>,
    pub hard_cauchy_abs: Option<f64>,
    pub fit_rms_tol: Option<f64>,
    pub fit_points: Option<usize>,
    pub growth_ratio_tol: Option<f64>,
    pub quad_rel_tol: Option<f64>,
    pub quad_abs_tol: Option<f64>,
    pub zero_scan_points: Option<usize>,
    pub unit_speed_tol: Option<f64>,
}

impl PolicyOverride {
    pub fn apply(&self, policy: &mut Policy) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { policy.$field = v; })*
            };
        }
        set!(
            window_base,
            k_max,
            divergence_threshold,
            p_margin,
            cauchy_rel,
            hard_cauchy_abs,
            fit_rms_tol,
            fit_points,
            growth_ratio_tol,
            quad_rel_tol,
            quad_abs_tol,
            zero_scan_points,
            unit_speed_tol
        );
    }
}

/// A spec file resolved into core types.
pub enum ResolvedSpec {
    Intrinsic(SurfaceSpec),
    Extrinsic { model: AmbientModel, curve: Curve2D },
}

pub fn range_pair(pair: &[RangeVal; 2], what: &str) -> Result<(f64, f64), String> {
    let lo = pair[0].value();
    let hi = pair[1].value();
    if !(lo < hi) {
        return Err(format!("{what}: range [{lo}, {hi}] is not ordered"));
    }
    Ok((lo, hi))
}

pub fn resolve(spec: &SpecFile) -> Result<ResolvedSpec, String> {
    match (&spec.intrinsic, &spec.extrinsic) {
        (Some(_), Some(_)) => Err("spec must have exactly one of intrinsic/extrinsic".into()),
        (None, None) => Err("spec needs an intrinsic or extrinsic section".into()),
        (Some(i), None) => resolve_intrinsic(i).map(ResolvedSpec::Intrinsic),
        (None, Some(e)) => resolve_extrinsic(e),
    }
}

fn resolve_intrinsic(spec: &IntrinsicSpec) -> Result<SurfaceSpec, String> {
    let base = match &spec.base {
        BaseSpec::Named(n) if n == "line" => Base::Line,
        BaseSpec::Named(n) => return Err(format!("unknown base `{n}` (expected \"line\")")),
        BaseSpec::Circle { circle } => Base::Circle { radius: *circle },
        BaseSpec::Compact { compact } => Base::CompactCurve { length: *compact },
    };
    let domain = match &spec.domain {
        Some(pair) => range_pair(pair, "mu domain")?,
        None => (f64::NEG_INFINITY, f64::INFINITY),
    };
    let mu = match &spec.mu {
        MuSpec::Formula(src) => {
            let expr = Expression::parse(src, &["s"]).map_err(|e| format!("mu: {e}"))?;
            MuProfile::from_expression(expr, domain, spec.zeros.clone())
                .map_err(|e| e.to_string())?
        }
        MuSpec::Table { table } => {
            let samples: Vec<(f64, f64)> = table.iter().map(|p| (p[0], p[1])).collect();
            MuProfile::from_table(&samples, spec.zeros.clone())
                .map_err(|e| e.to_string())?
                .with_domain(domain)
        }
    };
    Ok(SurfaceSpec { base, mu, fibers: spec.fibers.into() })
}

fn resolve_extrinsic(spec: &ExtrinsicSpec) -> Result<ResolvedSpec, String> {
    let model = match &spec.model {
        ModelSpec::Named(n) if n == "sol3" => sol3_model(),
        ModelSpec::Named(n) => return Err(format!("unknown model `{n}` (expected \"sol3\")")),
        ModelSpec::Ekt { ekt } => {
            let mu_constant = match ekt.mu_constant.as_deref() {
                None | Some("first-principles") => MuConstant::FirstPrinciples,
                Some("as-printed") => MuConstant::AsPrinted,
                Some(other) => return Err(format!("unknown mu_constant `{other}`")),
            };
            if ekt.kappa > 0.0 {
                // constructed lazily by the classifier shortcut; carry the
                // parameters through a berger marker model
                return Ok(ResolvedSpec::Extrinsic {
                    model: berger_marker(ekt.kappa, ekt.tau),
                    curve: resolve_curve(&spec.curve)?,
                });
            }
            ekt_model(ekt.kappa, ekt.tau, mu_constant).map_err(|e| e.to_string())?
        }
        ModelSpec::Custom { custom } => resolve_custom(custom)?,
    };
    Ok(ResolvedSpec::Extrinsic { model, curve: resolve_curve(&spec.curve)? })
}

/// Placeholder model for a positively curved base: the classifier
/// short-circuits before touching the metric, which only needs to be
/// well-formed.
fn berger_marker(kappa: f64, tau: f64) -> AmbientModel {
    let coords = ["r", "z"];
    AmbientModel {
        name: "ekt".into(),
        base: Metric2D::euclidean(coords),
        mu: Expression::parse("r", &coords).expect("marker mu"),
        fibers: FiberTopology::Compact,
        class: ModelClass::Ekt { kappa, tau },
        notes: Vec::new(),
    }
}

fn resolve_custom(custom: &CustomSpec) -> Result<AmbientModel, String> {
    let coords = [custom.coords[0].as_str(), custom.coords[1].as_str()];
    let parse = |src: &str, what: &str| -> Result<Expression, String> {
        Expression::parse(src, &coords).map_err(|e| format!("{what}: {e}"))
    };
    let e = parse(&custom.e, "E")?;
    let f = parse(&custom.f, "F")?;
    let g = parse(&custom.g, "G")?;
    let mu = parse(&custom.mu, "mu")?;
    let mut domain = Domain2D::all();
    if let Some(d) = &custom.domain {
        if let Some(pair) = &d.u {
            domain.u_range = range_pair(pair, "domain.u")?;
        }
        if let Some(pair) = &d.v {
            domain.v_range = range_pair(pair, "domain.v")?;
        }
        if let Some(src) = &d.constraint {
            domain.constraint = Some(parse(src, "domain.constraint")?);
        }
    }
    let base = Metric2D::new(coords, e, f, g, domain).map_err(|err| err.to_string())?;
    Ok(AmbientModel {
        name: "custom".into(),
        base,
        mu,
        fibers: custom.fibers.into(),
        class: ModelClass::Custom,
        notes: Vec::new(),
    })
}

fn resolve_curve(curve: &CurveSpec) -> Result<Curve2D, String> {
    let (lo, hi) = range_pair(&curve.t_range, "curve.t_range")?;
    Curve2D::parse(&curve.u, &curve.v, (lo, hi)).map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub u: String,
    pub v: String,
    pub t_range: [RangeVal; 2],
}
