//! Conformal-type classification of complete surfaces invariant under a
//! one-parameter isometry group.
//!
//! Everything reduces to the length profile `mu(s)` of the generating
//! vector field along an arc-length cross-section curve: the surface is
//! parabolic exactly when the improper integrals of `1/mu` over the
//! relevant tails diverge (with shortcuts for compact cross-sections and
//! bounded `mu`). The crate provides:
//!
//! - `expr`: parsing, evaluation and symbolic differentiation of the
//!   closed-form expressions that define profiles, metrics and curves;
//! - `geom`: 2D metric operations, arc-length reparameterization with
//!   dense output, warped-product curvature;
//! - `profile`: the `mu` profile type (expression- or table-backed);
//! - `classify`: the divergence engine and the decision procedure;
//! - `models`: built-in ambient spaces and example curves;
//! - `verify`: independent numerical cross-checks (finite-difference
//!   Laplacian, harmonic witness, flatness after normalization, and a
//!   stochastic first-exit oracle).

pub mod classify;
mod error;
pub mod expr;
pub mod geom;
pub mod models;
pub mod numeric;
pub mod profile;
pub mod verify;

pub use classify::{
    classify_extrinsic, classify_intrinsic, detect_zeros, endpoint_integral, tail_integral,
    Base, ClassificationReport, ComposedMu, DivergenceVerdict, Policy, Route, Rule, SurfaceSpec,
    TailReport, TailVerdict, Verdict, Witness,
};
pub use error::Error;
pub use expr::Expression;
pub use geom::{ArcLengthCurve, Curve2D, Direction, Metric2D};
pub use profile::{FiberTopology, MuProfile};
