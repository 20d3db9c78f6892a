//! Command implementations.

use std::fs;

use kparab::classify::{anchor_for, classify_extrinsic, classify_intrinsic, Policy, Route, Verdict};
use kparab::classify::ComposedMu;
use kparab::models::{
    builtin_catalog, penafiel_conformal_speed, Builtin, MuConstant, PenafielH, PenafielParams,
};
use kparab::verify::{
    annulus_harmonic_measure, curvature_flatness_check, laplacian_residual,
    simulate_radial_diffusion, witness,
};
use kparab::{Error, Expression, MuProfile};

use crate::jsonfmt::{self, format_g, Json};
use crate::report::report_json;
use crate::specfile::{self, PolicyOverride, ResolvedSpec, SpecFile};
use crate::{ClassifyArgs, CliError, SourceArgs, TabulateArgs, VerifyKind};

/// Effective policy: defaults, then KP_POLICY, then the spec file, then
/// command-line flags.
fn effective_policy(
    spec_policy: Option<&PolicyOverride>,
    flags: &PolicyOverride,
) -> Result<Policy, CliError> {
    let mut policy = Policy::default();
    if let Ok(path) = std::env::var("KP_POLICY") {
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::io(format!("KP_POLICY file {path}: {e}")))?;
        let over: PolicyOverride = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("KP_POLICY file {path}: {e}")))?;
        over.apply(&mut policy);
    }
    if let Some(over) = spec_policy {
        over.apply(&mut policy);
    }
    flags.apply(&mut policy);
    Ok(policy)
}

fn load_spec(path: &std::path::Path) -> Result<SpecFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

fn resolve_builtin(src: &SourceArgs, name: &str) -> Result<Builtin, CliError> {
    let mu_constant = match src.mu_constant.as_str() {
        "first-principles" => MuConstant::FirstPrinciples,
        "as-printed" => MuConstant::AsPrinted,
        other => return Err(CliError::usage(format!("unknown --mu-constant `{other}`"))),
    };
    match name {
        "sol3:S" => {
            let theta0 = src
                .theta0
                .ok_or_else(|| CliError::usage("sol3:S needs --theta0"))?;
            Ok(Builtin::Sol3S { theta0, a: src.a })
        }
        "sol3:Q" => Ok(Builtin::Sol3Q { t: src.t }),
        "sol3:R" => Ok(Builtin::Sol3R { t: src.t }),
        "sol3:cmc" => Ok(Builtin::Sol3Cmc),
        "ekt:umbrella" => Ok(Builtin::EktUmbrella {
            kappa: src.kappa,
            tau: src.tau,
            mu_constant,
        }),
        "penafiel" => {
            let h_raw = src.h.ok_or_else(|| CliError::usage("penafiel needs --H"))?;
            let h = PenafielH::from_value(h_raw).map_err(|e| CliError::usage(e.to_string()))?;
            let d = src.d.unwrap_or(-2.0 * h.value());
            Ok(Builtin::Penafiel(PenafielParams { h, tau: src.tau, d }))
        }
        other => Err(CliError::usage(format!(
            "unknown builtin `{other}`; run `kparab models` for the list"
        ))),
    }
}

fn parse_route(route: &str) -> Result<Route, CliError> {
    match route {
        "intrinsic" => Ok(Route::Intrinsic),
        "conformal" => Ok(Route::Conformal),
        "both" => Ok(Route::Both),
        other => Err(CliError::usage(format!(
            "unknown route `{other}` (expected intrinsic|conformal|both)"
        ))),
    }
}

pub fn classify(args: ClassifyArgs) -> Result<i32, CliError> {
    let route = parse_route(&args.route)?;
    let flags = args.policy.as_override();
    let report = match (&args.source.spec, &args.source.builtin) {
        (Some(path), None) => {
            let spec = load_spec(path)?;
            let policy = effective_policy(spec.policy.as_ref(), &flags)?;
            match specfile::resolve(&spec).map_err(CliError::usage)? {
                ResolvedSpec::Intrinsic(surface) => classify_intrinsic(&surface, &policy)?,
                ResolvedSpec::Extrinsic { model, curve } => {
                    classify_extrinsic(&model, &curve, route, &policy)?
                }
            }
        }
        (None, Some(name)) => {
            let policy = effective_policy(None, &flags)?;
            let builtin = resolve_builtin(&args.source, name)?;
            builtin.classify(route, &policy)?
        }
        _ => {
            return Err(CliError::usage(
                "classify needs exactly one of --spec or --builtin",
            ))
        }
    };
    print!("{}", jsonfmt::to_string(&report_json(&report)));
    Ok(match report.verdict {
        Verdict::Parabolic => 0,
        Verdict::Hyperbolic => 1,
        Verdict::Inconclusive => 2,
    })
}

fn parse_mu(src: &str) -> Result<MuProfile, CliError> {
    let expr = Expression::parse(src, &["x"]).map_err(Error::from)?;
    Ok(MuProfile::from_expression(expr, (f64::NEG_INFINITY, f64::INFINITY), vec![])?)
}

pub fn verify(kind: VerifyKind) -> Result<i32, CliError> {
    let (json, pass) = match kind {
        VerifyKind::Laplacian { mu, f, x, h } => {
            let profile = parse_mu(&mu)?;
            let f_expr = Expression::parse(&f, &["x"]).map_err(Error::from)?;
            let residual = laplacian_residual(&profile, &f_expr, x, h)?;
            let tolerance = 1e-6;
            let pass = residual.abs() <= tolerance;
            (
                Json::obj(vec![
                    ("kind", Json::s("laplacian")),
                    ("mu", Json::s(mu)),
                    ("f", Json::s(f)),
                    ("x", Json::Num(x)),
                    ("h", Json::Num(h)),
                    ("residual", Json::Num(residual)),
                    ("tolerance", Json::Num(tolerance)),
                    ("pass", Json::Bool(pass)),
                ]),
                pass,
            )
        }
        VerifyKind::Witness { mu, s0, policy } => {
            let profile = parse_mu(&mu)?;
            let pol = effective_policy(None, &policy.as_override())?;
            let w = witness(&profile, s0, &pol)?;
            let mut tails = Vec::new();
            for dir in [kparab::Direction::Minus, kparab::Direction::Plus] {
                tails.push(Json::obj(vec![
                    ("direction", Json::s(dir.symbol())),
                    ("verdict", Json::s(w.tail_verdict(dir).name())),
                    (
                        "bound",
                        w.bound(dir).map(Json::Num).unwrap_or(Json::Null),
                    ),
                ]));
            }
            let mut max_residual = 0.0f64;
            for probe in [-1.5, -0.5, 0.5, 1.5] {
                let r = w.harmonic_residual(s0 + probe, 1e-3)?.abs();
                max_residual = max_residual.max(r);
            }
            let tolerance = 1e-5;
            let pass = max_residual <= tolerance;
            (
                Json::obj(vec![
                    ("kind", Json::s("witness")),
                    ("mu", Json::s(mu)),
                    ("s0", Json::Num(s0)),
                    ("tails", Json::Arr(tails)),
                    ("harmonic_max_residual", Json::Num(max_residual)),
                    ("harmonic_tolerance", Json::Num(tolerance)),
                    ("pass", Json::Bool(pass)),
                ]),
                pass,
            )
        }
        VerifyKind::Curvature { mu, range } => {
            if range.len() != 2 {
                return Err(CliError::usage("--range needs two values"));
            }
            let profile = parse_mu(&mu)?;
            let max_k = curvature_flatness_check(&profile, (range[0], range[1]))?;
            let tolerance = 1e-8;
            let pass = max_k <= tolerance;
            (
                Json::obj(vec![
                    ("kind", Json::s("curvature")),
                    ("mu", Json::s(mu)),
                    (
                        "range",
                        Json::Arr(vec![Json::Num(range[0]), Json::Num(range[1])]),
                    ),
                    ("max_abs_curvature", Json::Num(max_k)),
                    ("tolerance", Json::Num(tolerance)),
                    ("pass", Json::Bool(pass)),
                ]),
                pass,
            )
        }
        VerifyKind::Walk { mu, a, b, x0, n, seed, dt } => {
            let profile = parse_mu(&mu)?;
            let closed = annulus_harmonic_measure(&profile, a, b, x0)?;
            let result = simulate_radial_diffusion(&profile, x0, a, b, dt, n, seed)?;
            let sigma = (closed * (1.0 - closed) / n as f64).sqrt();
            let pass = (result.probability - closed).abs() <= 3.0 * sigma;
            (
                Json::obj(vec![
                    ("kind", Json::s("walk")),
                    ("mu", Json::s(mu)),
                    ("a", Json::Num(a)),
                    ("b", Json::Num(b)),
                    ("x0", Json::Num(x0)),
                    ("n", Json::Num(n as f64)),
                    ("seed", Json::Num(seed as f64)),
                    ("dt", Json::Num(result.dt)),
                    ("probability", Json::Num(result.probability)),
                    ("closed_form", Json::Num(closed)),
                    ("three_sigma", Json::Num(3.0 * sigma)),
                    ("pass", Json::Bool(pass)),
                ]),
                pass,
            )
        }
    };
    print!("{}", jsonfmt::to_string(&json));
    Ok(if pass { 0 } else { 3 })
}

pub fn tabulate(args: TabulateArgs) -> Result<i32, CliError> {
    if args.range.len() != 2 {
        return Err(CliError::usage("--range needs two values"));
    }
    let (lo, hi) = (args.range[0], args.range[1]);
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(CliError::usage("--range must be a finite ordered interval"));
    }
    if args.samples < 2 {
        return Err(CliError::usage("--samples must be at least 2"));
    }
    let s0 = args.s0.unwrap_or(lo);
    let flags = args.policy.as_override();

    // resolve the mu field along arc length
    let field: Box<dyn Fn(f64) -> Result<f64, Error>> =
        match (&args.source.spec, &args.source.builtin) {
            (Some(path), None) => {
                let spec = load_spec(path)?;
                let policy = effective_policy(spec.policy.as_ref(), &flags)?;
                match specfile::resolve(&spec).map_err(CliError::usage)? {
                    ResolvedSpec::Intrinsic(surface) => {
                        let mu = surface.mu.clone();
                        Box::new(move |s| mu.value(s))
                    }
                    ResolvedSpec::Extrinsic { model, curve } => {
                        let t0 = anchor_for(curve.t_range(), policy.window_base);
                        let composed = ComposedMu::new(&model, &curve, t0)?;
                        Box::new(move |s| composed.value(s))
                    }
                }
            }
            (None, Some(name)) => {
                let policy = effective_policy(None, &flags)?;
                match resolve_builtin(&args.source, name)? {
                    Builtin::Penafiel(params) => {
                        // no mu profile: tabulate the effective 1/speed
                        let speed = penafiel_conformal_speed(&params)?;
                        Box::new(move |s: f64| {
                            if s <= 0.0 {
                                return Err(Error::OutsideDomain(s));
                            }
                            Ok(1.0 / speed.eval(&[s])?)
                        })
                    }
                    b => {
                        let (model, curve) = b
                            .model_and_curve()
                            .map_err(|e| CliError::usage(e.to_string()))?;
                        let t0 = anchor_for(curve.t_range(), policy.window_base);
                        let composed = ComposedMu::new(&model, &curve, t0)?;
                        Box::new(move |s| composed.value(s))
                    }
                }
            }
            _ => {
                return Err(CliError::usage(
                    "tabulate needs exactly one of --spec or --builtin",
                ))
            }
        };

    let n = args.samples;
    let mut out = String::from("s,mu,inv_mu,partial_integral_from_s0\r\n");
    // cumulative quadrature of 1/mu anchored at s0
    let inv = |s: f64| -> Result<f64, Error> {
        let v = field(s)?;
        if v <= 0.0 {
            return Err(Error::MuNonPositive { x: s, value: v });
        }
        Ok(1.0 / v)
    };
    let mut partial = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut prev = s0;
    for i in 0..n {
        let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        acc += kparab::numeric::quad::integrate(&inv, prev, s, 1e-12, 1e-11, 20_000)?.value;
        partial.push(acc);
        prev = s;
    }
    for i in 0..n {
        let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let mu = field(s)?;
        let inv_mu = 1.0 / mu;
        out.push_str(&format!(
            "{},{},{},{}\r\n",
            format_g(s),
            format_g(mu),
            format_g(inv_mu),
            format_g(partial[i])
        ));
    }
    print!("{out}");
    Ok(0)
}

pub fn models() -> Result<i32, CliError> {
    let mut out = String::new();
    for (name, params, description) in builtin_catalog() {
        out.push_str(&format!("{name:<14} {params:<66} {description}\n"));
    }
    print!("{out}");
    Ok(0)
}
