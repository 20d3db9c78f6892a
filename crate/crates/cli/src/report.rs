//! Classification reports as canonical JSON.

use kparab::classify::{ClassificationReport, Policy, TailModel, TailReport};

use crate::jsonfmt::Json;

pub fn report_json(r: &ClassificationReport) -> Json {
    let mut fields = vec![
        ("verdict", Json::s(r.verdict.name())),
        ("rule", Json::s(r.rule.name())),
        (
            "tails",
            Json::Arr(r.tails.iter().map(tail_json).collect()),
        ),
    ];
    if let Some(w) = &r.witness {
        fields.push((
            "witness",
            Json::obj(vec![
                ("direction", Json::s(w.direction.symbol())),
                ("bound", Json::Num(w.bound)),
            ]),
        ));
    }
    fields.push((
        "warnings",
        Json::Arr(r.warnings.iter().map(|w| Json::s(w.clone())).collect()),
    ));
    fields.push(("policy", policy_json(&r.policy)));
    Json::obj(fields)
}

fn tail_json(t: &TailReport) -> Json {
    Json::obj(vec![
        ("direction", Json::s(t.direction.symbol())),
        ("verdict", Json::s(t.detail.verdict.name())),
        (
            "partial_trace",
            Json::Arr(
                t.detail
                    .trace
                    .iter()
                    .map(|(s, v)| Json::Arr(vec![Json::Num(*s), Json::Num(*v)]))
                    .collect(),
            ),
        ),
        ("tail_model", model_json(&t.detail.model)),
        ("window_reached", Json::Num(t.detail.window_reached as f64)),
    ])
}

fn model_json(m: &TailModel) -> Json {
    match m {
        TailModel::Power { p, r2 } => Json::obj(vec![
            ("type", Json::s("power")),
            ("p", Json::Num(*p)),
            ("r2", Json::Num(*r2)),
        ]),
        TailModel::Exponential { rate } => Json::obj(vec![
            ("type", Json::s("exponential")),
            ("rate", Json::Num(*rate)),
        ]),
        TailModel::None => Json::obj(vec![("type", Json::s("none"))]),
    }
}

pub fn policy_json(p: &Policy) -> Json {
    Json::obj(vec![
        ("window_base", Json::Num(p.window_base)),
        ("k_max", Json::Num(p.k_max as f64)),
        ("divergence_threshold", Json::Num(p.divergence_threshold)),
        ("p_margin", Json::Num(p.p_margin)),
        ("cauchy_rel", Json::Num(p.cauchy_rel)),
        ("hard_cauchy_abs", Json::Num(p.hard_cauchy_abs)),
        ("fit_rms_tol", Json::Num(p.fit_rms_tol)),
        ("fit_points", Json::Num(p.fit_points as f64)),
        ("growth_ratio_tol", Json::Num(p.growth_ratio_tol)),
        ("quad_rel_tol", Json::Num(p.quad_rel_tol)),
        ("quad_abs_tol", Json::Num(p.quad_abs_tol)),
        ("zero_scan_points", Json::Num(p.zero_scan_points as f64)),
        ("unit_speed_tol", Json::Num(p.unit_speed_tol)),
    ])
}
