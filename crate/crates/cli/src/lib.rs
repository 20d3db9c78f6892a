//! Command-line machinery: spec ingestion, classification and
//! verification commands, JSON reports, CSV exports.
//!
//! Exit codes: 0 parabolic / verification pass, 1 hyperbolic,
//! 2 inconclusive, 3 verification fail, >= 10 errors (10 usage or spec
//! validation, 11 numerical, 12 I/O). Errors are machine-readable JSON on
//! standard error.

mod commands;
pub mod jsonfmt;
pub mod report;
pub mod specfile;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use jsonfmt::Json;

#[derive(Parser)]
#[command(
    name = "kparab",
    about = "Conformal-type classification of surfaces invariant under a one-parameter isometry group",
    long_about = "Decides whether an invariant surface is parabolic or hyperbolic by testing \
                  divergence of the integral of 1/mu along the cross-section tails, where mu is \
                  the length of the generating field.\n\n\
                  Expression grammar note: `^` binds tighter than unary minus, so -x^2 means \
                  -(x^2). There is no implicit multiplication.",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a surface spec (JSON file or built-in) and print a report.
    Classify(ClassifyArgs),
    /// Numerical verification commands (laplacian, witness, curvature, walk).
    Verify(VerifyArgs),
    /// Tabulate s, mu, 1/mu and the running integral of 1/mu as CSV.
    Tabulate(TabulateArgs),
    /// List the built-in surfaces.
    Models,
}

#[derive(Args)]
struct SourceArgs {
    /// Path to a JSON spec file.
    #[arg(long, conflicts_with = "builtin")]
    spec: Option<std::path::PathBuf>,
    /// Built-in surface name (see `kparab models`).
    #[arg(long)]
    builtin: Option<String>,
    /// Angle parameter of the sol3:S family (radians, tan > 0 required).
    #[arg(long)]
    theta0: Option<f64>,
    /// Translation parameter of the sol3:S family.
    #[arg(long, default_value_t = 0.0)]
    a: f64,
    /// Leaf index for sol3:Q and sol3:R.
    #[arg(long, default_value_t = 0.0)]
    t: f64,
    /// Base curvature for ekt models (kappa > 0 short-circuits).
    #[arg(long, default_value_t = 0.0)]
    kappa: f64,
    /// Bundle parameter for ekt and penafiel models.
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Normalization of the rotational mu: first-principles (4) or as-printed (2).
    #[arg(long, default_value = "first-principles")]
    mu_constant: String,
    /// Mean curvature for the penafiel family (0 or 0.5).
    #[arg(long = "H")]
    h: Option<f64>,
    /// Height integration constant for the penafiel family.
    #[arg(long)]
    d: Option<f64>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Classification route: intrinsic (arc-length profile), conformal
    /// (completeness in g/mu^2), or both (cross-checked).
    #[arg(long, default_value = "both")]
    route: String,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(subcommand)]
    kind: VerifyKind,
}

#[derive(Subcommand)]
enum VerifyKind {
    /// Residual of the finite-difference Laplacian against (1/mu)(mu f')'.
    Laplacian {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        f: String,
        #[arg(long)]
        x: f64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
    },
    /// Bounded harmonic witness F(s) = integral from s to s0 of dx/mu.
    Witness {
        #[arg(long)]
        mu: String,
        #[arg(long, default_value_t = 0.0)]
        s0: f64,
        #[command(flatten)]
        policy: PolicyArgs,
    },
    /// Flatness of the constant-norm conformal normalization.
    Curvature {
        #[arg(long)]
        mu: String,
        /// Interval to probe.
        #[arg(long, num_args = 2, allow_negative_numbers = true)]
        range: Vec<f64>,
    },
    /// First-exit probabilities of the radial diffusion vs closed form.
    Walk {
        #[arg(long)]
        mu: String,
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        x0: f64,
        #[arg(long, default_value_t = 100_000)]
        n: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Euler-Maruyama step (default 1e-4 (b-a)^2).
        #[arg(long)]
        dt: Option<f64>,
    },
}

#[derive(Args)]
struct TabulateArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Arc-length range to tabulate.
    #[arg(long, num_args = 2, allow_negative_numbers = true)]
    range: Vec<f64>,
    /// Number of rows (samples).
    #[arg(long, default_value_t = 65)]
    samples: usize,
    /// Anchor of the running integral (default: range start).
    #[arg(long)]
    s0: Option<f64>,
    #[command(flatten)]
    policy: PolicyArgs,
}

/// Divergence-engine tunables (override spec-file and KP_POLICY values).
#[derive(Args, Default, Clone)]
struct PolicyArgs {
    #[arg(long)]
    window_base: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    divergence_threshold: Option<f64>,
    #[arg(long)]
    p_margin: Option<f64>,
    #[arg(long)]
    cauchy_rel: Option<f64>,
    #[arg(long)]
    hard_cauchy_abs: Option<f64>,
    #[arg(long)]
    fit_rms_tol: Option<f64>,
    #[arg(long)]
    fit_points: Option<usize>,
    #[arg(long)]
    growth_ratio_tol: Option<f64>,
    #[arg(long)]
    quad_rel_tol: Option<f64>,
    #[arg(long)]
    quad_abs_tol: Option<f64>,
    #[arg(long)]
    zero_scan_points: Option<usize>,
    #[arg(long)]
    unit_speed_tol: Option<f64>,
}

impl PolicyArgs {
    fn as_override(&self) -> specfile::PolicyOverride {
        specfile::PolicyOverride {
            window_base: self.window_base,
            k_max: self.k_max,
            divergence_threshold: self.divergence_threshold,
            p_margin: self.p_margin,
            cauchy_rel: self.cauchy_rel,
            hard_cauchy_abs: self.hard_cauchy_abs,
            fit_rms_tol: self.fit_rms_tol,
            fit_points: self.fit_points,
            growth_ratio_tol: self.growth_ratio_tol,
            quad_rel_tol: self.quad_rel_tol,
            quad_abs_tol: self.quad_abs_tol,
            zero_scan_points: self.zero_scan_points,
            unit_speed_tol: self.unit_speed_tol,
        }
    }
}

/// Error category mapped to an exit code.
pub enum CliErrorKind {
    Usage,
    Numerical,
    Io,
}

pub struct CliError {
    kind: CliErrorKind,
    message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError { kind: CliErrorKind::Usage, message: msg.into() }
    }

    pub fn numerical(msg: impl Into<String>) -> CliError {
        CliError { kind: CliErrorKind::Numerical, message: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> CliError {
        CliError { kind: CliErrorKind::Io, message: msg.into() }
    }

    fn exit_code(&self) -> i32 {
        match self.kind {
            CliErrorKind::Usage => 10,
            CliErrorKind::Numerical => 11,
            CliErrorKind::Io => 12,
        }
    }

    fn kind_name(&self) -> &'static str {
        match self.kind {
            CliErrorKind::Usage => "usage",
            CliErrorKind::Numerical => "numerical",
            CliErrorKind::Io => "io",
        }
    }
}

impl From<kparab::Error> for CliError {
    fn from(e: kparab::Error) -> CliError {
        use kparab::Error as E;
        match &e {
            E::Parse(_) | E::InvalidInput(_) | E::InconsistentSpec(_) => {
                CliError::usage(e.to_string())
            }
            _ => CliError::numerical(e.to_string()),
        }
    }
}

fn emit_error(err: &CliError) {
    let j = Json::obj(vec![(
        "error",
        Json::obj(vec![
            ("kind", Json::s(err.kind_name())),
            ("message", Json::s(err.message.clone())),
        ]),
    )]);
    eprint!("{}", jsonfmt::to_string(&j));
}

/// Parse arguments and run; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    emit_error(&CliError::usage(e.to_string()));
                    10
                }
            };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            emit_error(&err);
            err.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Classify(args) => commands::classify(args),
        Command::Verify(args) => commands::verify(args.kind),
        Command::Tabulate(args) => commands::tabulate(args),
        Command::Models => commands::models(),
    }
}
