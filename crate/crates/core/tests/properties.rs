//! Property tests: parser totality, derivative correctness against finite
//! differences, and divergence-engine structure.

use kparab::classify::{tail_integral, TailVerdict};
use kparab::geom::Direction;
use kparab::{Expression, Policy};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    /// Parsing is total: any input yields an expression or a positioned
    /// error, never a panic.
    #[test]
    fn parse_never_panics(src in ".{0,64}") {
        let _ = Expression::parse(&src, &["x", "y"]);
    }

    /// Same, over a denser operator-heavy alphabet.
    #[test]
    fn parse_never_panics_mathy(src in "[-+*/^()a-z0-9. ]{0,48}") {
        if let Ok(e) = Expression::parse(&src, &["x", "y"]) {
            // parsed expressions evaluate or fault, never panic
            let _ = e.eval(&[0.5, -1.5]);
        }
    }

    /// Error offsets point inside (or at the end of) the source.
    #[test]
    fn error_offsets_in_range(src in "[-+*/^()a-z0-9.]{0,40}") {
        if let Err(e) = Expression::parse(&src, &["x"]) {
            prop_assert!(e.offset <= src.len());
        }
    }
}

/// Central-difference oracle with the stated step.
fn central_diff(e: &Expression, x: f64, h: f64) -> f64 {
    let up = e.eval(&[x + h]).unwrap();
    let dn = e.eval(&[x - h]).unwrap();
    (up - dn) / (2.0 * h)
}

#[test]
fn derivatives_match_central_differences() {
    let formulas = [
        "x^2",
        "exp(-x)",
        "sin(x)*cosh(x)",
        "1/(1 + x^2)",
        "sqrt(1 + x^2)",
        "tanh(x/2)",
        "exp(x*sin(x))",
        "log(2 + x^2)",
        "atan(x)*x^3",
        "x^2*exp(-x^2)",
    ];
    // fixed pseudo-random evaluation grid
    let points: Vec<f64> = (0..24).map(|i| -2.0 + 4.0 * (i as f64 * 0.618034).fract()).collect();
    for src in formulas {
        let e = Expression::parse(src, &["x"]).unwrap();
        let d = e.differentiate("x").unwrap();
        for &x in &points {
            let sym = d.eval(&[x]).unwrap();
            let fd = central_diff(&e, x, 1e-5);
            let tol = 1e-8 * sym.abs().max(1.0);
            assert!(
                (sym - fd).abs() <= tol.max(1e-8),
                "{src} at {x}: symbolic {sym} vs fd {fd}"
            );
        }
    }
}

#[test]
fn derivative_of_specific_examples() {
    // d/dx x^2 = 2x everywhere on a grid
    let e = Expression::parse("x^2", &["x"]).unwrap();
    let d = e.differentiate("x").unwrap();
    for i in -10..=10 {
        let x = i as f64 * 0.37;
        assert!((d.eval(&[x]).unwrap() - 2.0 * x).abs() < 1e-12);
    }
    // d/dx exp(-x) at 0 = -1
    let e = Expression::parse("exp(-x)", &["x"]).unwrap();
    let d = e.differentiate("x").unwrap();
    assert!((d.eval(&[0.0]).unwrap() + 1.0).abs() < 1e-15);
    // sin cosh product at 0.7 against the stated oracle step
    let e = Expression::parse("sin(x)*cosh(x)", &["x"]).unwrap();
    let d = e.differentiate("x").unwrap();
    let fd = central_diff(&e, 0.7, 1e-5);
    assert!((d.eval(&[0.7]).unwrap() - fd).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The partial-integral trace is nondecreasing for positive fields.
    #[test]
    fn trace_nondecreasing(p in 0.3f64..2.5) {
        let policy = Policy::default();
        let v = tail_integral(
            move |s: f64| Ok(s.powf(-p)),
            1.0,
            Direction::Plus,
            &policy,
        ).unwrap();
        for w in v.trace.windows(2) {
            prop_assert!(w[1].1 >= w[0].1 - 1e-9);
        }
    }

    /// Definite verdicts on clean power tails never contradict the truth.
    #[test]
    fn power_tails_never_lie(p in 0.2f64..3.0) {
        let policy = Policy::default();
        let v = tail_integral(
            move |s: f64| Ok(s.powf(-p)),
            1.0,
            Direction::Plus,
            &policy,
        ).unwrap();
        if p < 1.0 {
            prop_assert_ne!(v.verdict, TailVerdict::Convergent, "p = {}", p);
        }
        if p > 1.0 {
            prop_assert_ne!(v.verdict, TailVerdict::Divergent, "p = {}", p);
        }
    }
}

#[test]
fn parse_reports_paper_formulas() {
    // the two formula shapes carried through the models
    assert!(Expression::parse("exp(-s*sin(theta0))", &["s", "theta0"]).is_ok());
    assert!(
        Expression::parse("4*r*sqrt(1+r^2*tau^2)/(4+kappa*r^2)", &["r", "tau", "kappa"]).is_ok()
    );
    let err = Expression::parse("2*+x", &["x"]).unwrap_err();
    assert_eq!(err.offset, 2);
}

#[test]
fn evaluation_examples() {
    let e = Expression::parse("x^2", &["x"]).unwrap();
    assert_eq!(e.eval(&[3.0]).unwrap(), 9.0);
    let mu = Expression::parse("4*r*sqrt(1+r^2*tau^2)/(4+kappa*r^2)", &["r", "tau", "kappa"])
        .unwrap();
    assert_eq!(mu.eval(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
    let log = Expression::parse("log(x)", &["x"]).unwrap();
    assert!(log.eval(&[-1.0]).is_err());
}

#[test]
fn display_parse_round_trip() {
    // the printed form of an expression must parse back to the same
    // function (curve reparameterization composes through the printer)
    let formulas = [
        "x^2 - 3*x + 1",
        "-x^2",
        "2^-x",
        "exp(-x*sin(x))/(1 + x^2)",
        "sqrt(abs(x))*atan(x/2)",
        "x^(x^2/8 + 1)",
    ];
    for src in formulas {
        let e = Expression::parse(src, &["x"]).unwrap();
        let printed = e.to_string();
        let back = Expression::parse(&printed, &["x"])
            .unwrap_or_else(|err| panic!("`{printed}` failed to reparse: {err}"));
        for i in 0..20 {
            let x = 0.2 + i as f64 * 0.17;
            let a = e.eval(&[x]).unwrap();
            let b = back.eval(&[x]).unwrap();
            assert!(
                (a - b).abs() <= 1e-14 * a.abs().max(1.0),
                "{src} -> {printed}: {a} vs {b} at {x}"
            );
        }
        // derivatives print and reparse too
        let d = e.differentiate("x").unwrap();
        let printed = d.to_string();
        assert!(Expression::parse(&printed, &["x"]).is_ok(), "{printed}");
    }
}

#[test]
fn expressions_are_thread_safe() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<Expression>();
    assert_send_sync::<kparab::MuProfile>();
    assert_send_sync::<kparab::Metric2D>();

    // concurrent evaluation of one shared expression
    let e = std::sync::Arc::new(Expression::parse("sin(x)*exp(-x/3)", &["x"]).unwrap());
    let handles: Vec<_> = (0..4)
        .map(|k| {
            let e = e.clone();
            std::thread::spawn(move || {
                let mut acc = 0.0;
                for i in 0..1000 {
                    acc += e.eval(&[k as f64 + i as f64 * 1e-3]).unwrap();
                }
                acc
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
}

#[test]
fn dense_output_queries_are_reentrant() {
    use kparab::geom::{arclength_reparam, Curve2D, Direction, Metric2D};
    let curve = Curve2D::parse("t^3 + t", "cos(t)", (f64::NEG_INFINITY, f64::INFINITY)).unwrap();
    let metric = Metric2D::euclidean(["u", "v"]);
    let alc = std::sync::Arc::new(
        arclength_reparam(&curve, &metric, 0.0, Direction::Plus).unwrap(),
    );
    // competing queries force concurrent lazy extension
    let handles: Vec<_> = (0..4)
        .map(|k| {
            let alc = alc.clone();
            std::thread::spawn(move || {
                for i in 1..200 {
                    let s = (k * 50 + i) as f64 * 3.7;
                    let t = alc.t_at(s).unwrap();
                    assert!(t.is_finite());
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    // consistency after the race: strictly increasing t(s)
    let mut last = f64::NEG_INFINITY;
    for i in 1..100 {
        let t = alc.t_at(i as f64 * 7.0).unwrap();
        assert!(t > last);
        last = t;
    }
}
