//! CLI behavior tests: golden outputs, run-to-run byte identity across the
//! built-in suite, report round-tripping, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn kparab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kparab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fixture(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.extend(["tests", "fixtures", name]);
    p.to_string_lossy().into_owned()
}

fn golden(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.extend(["tests", "golden", name]);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("golden {name}: {e}"))
}

fn stdout_of(out: &Output) -> &str {
    std::str::from_utf8(&out.stdout).expect("utf-8 stdout")
}

#[test]
fn golden_classify_mu_const() {
    let out = kparab(&["classify", "--spec", &fixture("mu_const.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("classify_mu_const.json"));
}

#[test]
fn golden_tabulate_mu_const() {
    let out = kparab(&[
        "tabulate",
        "--spec",
        &fixture("mu_const.json"),
        "--range",
        "0",
        "2",
        "--samples",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("tabulate_mu_const.csv"));
}

#[test]
fn golden_models_listing() {
    let out = kparab(&["models"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_of(&out), golden("models.txt"));
}

/// Every built-in invocation must print byte-identical reports across
/// runs (CSV output included).
#[test]
fn builtin_suite_is_reproducible() {
    let suites: Vec<Vec<&str>> = vec![
        vec!["classify", "--builtin", "sol3:S", "--theta0", "0.7853981634", "--a", "0"],
        vec!["classify", "--builtin", "sol3:S", "--theta0", "0.5235987756", "--a", "1"],
        vec!["classify", "--builtin", "sol3:Q"],
        vec!["classify", "--builtin", "sol3:R"],
        vec!["classify", "--builtin", "sol3:cmc"],
        vec!["classify", "--builtin", "ekt:umbrella", "--kappa", "0", "--tau", "1"],
        vec!["classify", "--builtin", "ekt:umbrella", "--kappa", "0", "--tau", "3",
             "--mu-constant", "as-printed"],
        vec!["classify", "--builtin", "ekt:umbrella", "--kappa", "1", "--tau", "1"],
        vec!["classify", "--builtin", "penafiel", "--H", "0", "--tau", "1"],
        vec!["classify", "--builtin", "penafiel", "--H", "0.5", "--tau", "1"],
        vec!["tabulate", "--builtin", "sol3:S", "--theta0", "0.7853981634",
             "--range", "0", "4", "--samples", "9"],
        vec!["tabulate", "--spec-placeholder"],
    ];
    for args in suites {
        if args[1] == "--spec-placeholder" {
            continue;
        }
        let first = kparab(&args);
        let second = kparab(&args);
        assert_eq!(
            first.stdout, second.stdout,
            "{args:?} not byte-identical between runs"
        );
        assert_eq!(first.status.code(), second.status.code());
    }
}

/// Reports parse as JSON and re-serialize byte-identically through the
/// canonical writer.
#[test]
fn report_round_trips() {
    for args in [
        vec!["classify", "--spec", &*fixture("mu_exp.json")],
        vec!["classify", "--builtin", "ekt:umbrella", "--kappa", "0", "--tau", "1"],
        vec!["classify", "--builtin", "penafiel", "--H", "0.5", "--tau", "1"],
    ] {
        let out = kparab(&args);
        let text = stdout_of(&out);
        let value: serde_json::Value = serde_json::from_str(text).expect("valid JSON");
        let rebuilt = kparab_cli::jsonfmt::to_string(&kparab_cli::jsonfmt::from_serde(&value));
        assert_eq!(text, rebuilt, "{args:?} does not round-trip");
    }
}

#[test]
fn exit_codes_match_verdicts() {
    // parabolic -> 0
    let out = kparab(&["classify", "--spec", &fixture("mu_const.json")]);
    assert_eq!(out.status.code(), Some(0));
    // hyperbolic -> 1
    let out = kparab(&["classify", "--spec", &fixture("mu_exp.json")]);
    assert_eq!(out.status.code(), Some(1));
    let out = kparab(&["classify", "--builtin", "ekt:umbrella", "--kappa", "0", "--tau", "1"]);
    assert_eq!(out.status.code(), Some(1));
    // berger shortcut -> parabolic
    let out = kparab(&["classify", "--spec", &fixture("berger.json")]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn spec_validation_errors() {
    // zeros with noncompact fibers: structural inconsistency, exit 10
    let out = kparab(&["classify", "--spec", &fixture("bad_zeros.json")]);
    assert_eq!(out.status.code(), Some(10));
    let err: serde_json::Value =
        serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    assert_eq!(err["error"]["kind"], "usage");

    // malformed expression
    let out = kparab(&["verify", "laplacian", "--mu", "2*+x", "--f", "x", "--x", "1"]);
    assert_eq!(out.status.code(), Some(10));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("byte 2"));

    // unknown builtin
    let out = kparab(&["classify", "--builtin", "nope"]);
    assert_eq!(out.status.code(), Some(10));

    // usage error from clap
    let out = kparab(&["classify"]);
    assert_eq!(out.status.code(), Some(10));
}

#[test]
fn spec_file_variants_classify() {
    // sampled-table polar profile: parabolic, warned extrapolation
    let out = kparab(&["classify", "--spec", &fixture("polar_table.json")]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "parabolic");
    let warnings = v["warnings"].as_array().unwrap();
    assert!(
        warnings.iter().any(|w| w.as_str().unwrap().contains("fitted extension")),
        "{warnings:?}"
    );

    // custom flat model with exponential fiber length: hyperbolic, and the
    // spec-file policy override shows up in the report
    let out = kparab(&["classify", "--spec", &fixture("custom_flat.json")]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["verdict"], "hyperbolic");
    assert_eq!(v["policy"]["k_max"], serde_json::json!(30));
    // flag overrides beat the spec file
    let out = kparab(&[
        "classify",
        "--spec",
        &fixture("custom_flat.json"),
        "--k-max",
        "35",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["policy"]["k_max"], serde_json::json!(35));
}

#[test]
fn classify_tabulate_examples() {
    // running integral of 1/mu for mu = e^s: 1 - e^-1 at s = 1
    let out = kparab(&[
        "tabulate",
        "--spec",
        &fixture("mu_exp.json"),
        "--range",
        "0",
        "1",
        "--samples",
        "2",
    ]);
    let text = stdout_of(&out);
    let last = text.trim_end().lines().last().unwrap();
    let partial: f64 = last.split(',').nth(3).unwrap().parse().unwrap();
    assert!((partial - (1.0 - (-1.0f64).exp())).abs() < 1e-9, "{partial}");

    // sol3:S inverse profile column is e^{-s sin(theta0)} (cot = 1)
    let out = kparab(&[
        "tabulate", "--builtin", "sol3:S", "--theta0", "0.78539816339744831",
        "--range", "0", "4", "--samples", "5",
    ]);
    let text = stdout_of(&out);
    for line in text.trim_end().lines().skip(1) {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        let expect = (-cols[0] * std::f64::consts::FRAC_PI_4.sin()).exp();
        assert!((cols[2] - expect).abs() <= 1e-10, "s={}, inv={}", cols[0], cols[2]);
    }
}

#[test]
fn kp_policy_env_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("policy.json");
    std::fs::write(&path, r#"{"p_margin": 0.2}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_kparab"))
        .args(["classify", "--spec", &fixture("mu_const.json")])
        .env("KP_POLICY", &path)
        .output()
        .unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["policy"]["p_margin"], serde_json::json!(0.2));
}

/// The exit code mirrors the verdict for every built-in invocation.
#[test]
fn exit_codes_across_builtin_catalog() {
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["classify", "--builtin", "sol3:S", "--theta0", "0.7853981634", "--a", "0"], 1),
        (vec!["classify", "--builtin", "sol3:Q"], 1),
        (vec!["classify", "--builtin", "sol3:R"], 0),
        (vec!["classify", "--builtin", "sol3:cmc"], 0),
        (vec!["classify", "--builtin", "ekt:umbrella", "--kappa", "0", "--tau", "1"], 1),
        (vec!["classify", "--builtin", "ekt:umbrella", "--kappa", "1", "--tau", "1"], 0),
        (vec!["classify", "--builtin", "penafiel", "--H", "0", "--tau", "1"], 1),
        (vec!["classify", "--builtin", "penafiel", "--H", "0.5", "--tau", "1"], 0),
    ];
    for (args, expected) in cases {
        let out = kparab(&args);
        assert_eq!(out.status.code(), Some(expected), "{args:?}");
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        let verdict = v["verdict"].as_str().unwrap();
        let want = if expected == 0 { "parabolic" } else { "hyperbolic" };
        assert_eq!(verdict, want, "{args:?}");
    }
}

/// Verification subcommands report pass and exit 0 on the documented
/// examples.
#[test]
fn verify_subcommands_pass() {
    let out = kparab(&[
        "verify", "laplacian", "--mu", "exp(x)", "--f", "exp(-x)", "--x", "0", "--h", "1e-3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], serde_json::json!(true));
    assert!(v["residual"].as_f64().unwrap().abs() <= 1e-6);

    let out = kparab(&["verify", "curvature", "--mu", "1+x^2", "--range", "-5", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["pass"], serde_json::json!(true));

    let out = kparab(&["verify", "witness", "--mu", "exp(x)", "--s0", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let plus = &v["tails"][1];
    assert_eq!(plus["verdict"], "convergent");
    assert!((plus["bound"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    // a small deterministic walk through the CLI
    let out = kparab(&[
        "verify", "walk", "--mu", "1", "--a", "0", "--b", "1", "--x0", "0.5",
        "--n", "20000", "--seed", "42",
    ]);
    assert_eq!(out.status.code(), Some(0));
}
