//! 2D Riemannian metric operations: tangent norms, conformal rescaling,
//! arc-length reparameterization with dense output, Gaussian curvature of
//! warped metrics, curve length.

use std::sync::{Arc, RwLock};

use crate::error::Error;
use crate::expr::{BinOp, Expression};
use crate::numeric::ode::{self, DenseStep, OdeOptions};
use crate::numeric::{quad, MAX_PANELS};
use crate::profile::MuProfile;

/// Probe rectangle half-width used when a declared domain side is infinite.
const PROBE_EXTENT: f64 = 50.0;
/// Grid resolution for construction-time positivity checks.
const PROBE_GRID: usize = 64;
/// Curve speeds below this are a regularity failure.
pub const REGULARITY_FLOOR: f64 = 1e-12;

/// Tail direction / traversal sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Plus,
    Minus,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Direction::Plus => "+",
            Direction::Minus => "-",
        }
    }
}

/// Rectangle bounds plus an optional strict-positivity constraint.
#[derive(Debug, Clone)]
pub struct Domain2D {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    /// When present, points require constraint(u, v) > 0.
    pub constraint: Option<Expression>,
}

impl Domain2D {
    pub fn all() -> Domain2D {
        Domain2D {
            u_range: (f64::NEG_INFINITY, f64::INFINITY),
            v_range: (f64::NEG_INFINITY, f64::INFINITY),
            constraint: None,
        }
    }

    fn contains(&self, u: f64, v: f64) -> Result<bool, Error> {
        if u < self.u_range.0 || u > self.u_range.1 || v < self.v_range.0 || v > self.v_range.1 {
            return Ok(false);
        }
        if let Some(c) = &self.constraint {
            return Ok(c.eval(&[u, v])? > 0.0);
        }
        Ok(true)
    }
}

/// A 2D Riemannian metric E du^2 + 2F du dv + G dv^2 with expression
/// components over named coordinates.
#[derive(Debug, Clone)]
pub struct Metric2D {
    coords: [String; 2],
    e: Expression,
    f: Expression,
    g: Expression,
    domain: Domain2D,
}

impl Metric2D {
    /// Validates E > 0, G > 0, EG - F^2 > 0 on a probe grid over the
    /// declared domain (infinite sides are clamped for probing only).
    pub fn new(
        coords: [&str; 2],
        e: Expression,
        f: Expression,
        g: Expression,
        domain: Domain2D,
    ) -> Result<Metric2D, Error> {
        let m = Metric2D {
            coords: [coords[0].to_string(), coords[1].to_string()],
            e,
            f,
            g,
            domain,
        };
        m.validate_positive()?;
        Ok(m)
    }

    /// Flat metric du^2 + dv^2 on the whole plane.
    pub fn euclidean(coords: [&str; 2]) -> Metric2D {
        let one = Expression::constant(1.0, &coords);
        let zero = Expression::constant(0.0, &coords);
        Metric2D::new(coords, one.clone(), zero, one, Domain2D::all()).expect("flat metric")
    }

    pub fn coords(&self) -> [&str; 2] {
        [&self.coords[0], &self.coords[1]]
    }

    pub fn domain(&self) -> &Domain2D {
        &self.domain
    }

    pub fn component_exprs(&self) -> (&Expression, &Expression, &Expression) {
        (&self.e, &self.f, &self.g)
    }

    fn probe_points(&self) -> Vec<(f64, f64)> {
        let clamp = |r: (f64, f64)| -> (f64, f64) {
            let lo = if r.0.is_finite() { r.0 } else { -PROBE_EXTENT };
            let hi = if r.1.is_finite() { r.1 } else { PROBE_EXTENT };
            (lo, hi.max(lo + 1e-9))
        };
        let (ulo, uhi) = clamp(self.domain.u_range);
        let (vlo, vhi) = clamp(self.domain.v_range);
        let mut pts = Vec::with_capacity(PROBE_GRID * PROBE_GRID);
        for i in 0..PROBE_GRID {
            // half-offset grid avoids landing exactly on excluded boundaries
            let u = ulo + (i as f64 + 0.5) / PROBE_GRID as f64 * (uhi - ulo);
            for j in 0..PROBE_GRID {
                let v = vlo + (j as f64 + 0.5) / PROBE_GRID as f64 * (vhi - vlo);
                pts.push((u, v));
            }
        }
        pts
    }

    fn validate_positive(&self) -> Result<(), Error> {
        let mut seen_valid = false;
        for (u, v) in self.probe_points() {
            if !self.domain.contains(u, v)? {
                continue;
            }
            seen_valid = true;
            let (e, f, g) = self.components_unchecked(u, v)?;
            let det = e * g - f * f;
            if !(e > 0.0 && g > 0.0 && det > 0.0) {
                return Err(Error::MetricNotPositive { u, v, e, g, det });
            }
        }
        if !seen_valid {
            return Err(Error::invalid(
                "metric domain contains no probe points; check the constraint",
            ));
        }
        Ok(())
    }

    fn components_unchecked(&self, u: f64, v: f64) -> Result<(f64, f64, f64), Error> {
        let args = [u, v];
        Ok((self.e.eval(&args)?, self.f.eval(&args)?, self.g.eval(&args)?))
    }

    /// Metric components at a point, with the domain check applied.
    pub fn components(&self, u: f64, v: f64) -> Result<(f64, f64, f64), Error> {
        if !self.domain.contains(u, v)? {
            return Err(Error::DomainExit { u, v });
        }
        self.components_unchecked(u, v)
    }

    /// Norm of a tangent vector (du, dv) at (u, v). Terms with a zero
    /// velocity component are skipped so axis-parallel directions stay
    /// finite where the transverse component overflows.
    pub fn norm(&self, u: f64, v: f64, du: f64, dv: f64) -> Result<f64, Error> {
        let (e, f, g) = self.components(u, v)?;
        let mut q = 0.0;
        if du != 0.0 {
            q += e * du * du;
        }
        if du != 0.0 && dv != 0.0 {
            q += 2.0 * f * du * dv;
        }
        if dv != 0.0 {
            q += g * dv * dv;
        }
        if q.is_nan() {
            // overflow products (inf * 0): report as non-finite, not as a
            // zero-speed point
            return Err(Error::NonFiniteIntegrand { at: u });
        }
        // q can round slightly negative for null-ish vectors
        Ok(q.max(0.0).sqrt())
    }
}

/// Returns f^2 * g with the components multiplied symbolically.
/// The factor must be positive on the probe grid.
pub fn conformal_scale(metric: &Metric2D, factor: &Expression) -> Result<Metric2D, Error> {
    for (u, v) in metric.probe_points() {
        if !metric.domain.contains(u, v)? {
            continue;
        }
        let value = factor.eval(&[u, v])?;
        if !(value > 0.0) {
            return Err(Error::FactorNotPositive { u, v, value });
        }
    }
    let f2 = Expression::combine(BinOp::Mul, factor, factor);
    let scale = |c: &Expression| Expression::combine(BinOp::Mul, &f2, c);
    Metric2D::new(
        [&metric.coords[0], &metric.coords[1]],
        scale(&metric.e),
        scale(&metric.f),
        scale(&metric.g),
        metric.domain.clone(),
    )
}

/// A parameterized curve (u(t), v(t)) with symbolic derivatives.
#[derive(Debug, Clone)]
pub struct Curve2D {
    u: Expression,
    v: Expression,
    du: Expression,
    dv: Expression,
    t_range: (f64, f64),
}

impl Curve2D {
    pub fn new(u: Expression, v: Expression, t_range: (f64, f64)) -> Result<Curve2D, Error> {
        if u.vars().len() != 1 || v.vars().len() != 1 || u.vars()[0] != v.vars()[0] {
            return Err(Error::invalid(
                "curve components must share a single parameter variable",
            ));
        }
        if !(t_range.0 < t_range.1) {
            return Err(Error::invalid("curve parameter interval is empty"));
        }
        let var = u.vars()[0].clone();
        let du = u.differentiate(&var)?;
        let dv = v.differentiate(&var)?;
        Ok(Curve2D { u, v, du, dv, t_range })
    }

    /// Shorthand for curves given by source strings in the parameter `t`.
    pub fn parse(u: &str, v: &str, t_range: (f64, f64)) -> Result<Curve2D, Error> {
        Curve2D::new(
            Expression::parse(u, &["t"])?,
            Expression::parse(v, &["t"])?,
            t_range,
        )
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.t_range
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_range.0 && t <= self.t_range.1
    }

    pub fn point(&self, t: f64) -> Result<(f64, f64), Error> {
        Ok((self.u.eval(&[t])?, self.v.eval(&[t])?))
    }

    pub fn velocity(&self, t: f64) -> Result<(f64, f64), Error> {
        Ok((self.du.eval(&[t])?, self.dv.eval(&[t])?))
    }

    /// Reparameterize by composing with a monotone map t = m(tau).
    pub fn precompose(&self, map: &Expression) -> Result<Curve2D, Error> {
        if map.vars().len() != 1 {
            return Err(Error::invalid("parameter map must have one variable"));
        }
        let sub = |e: &Expression| -> Result<Expression, Error> {
            // substitute t -> map(tau) by re-parsing through composition
            Ok(compose(e, map)?)
        };
        // the parameter interval maps through m; assume m monotone increasing
        // over the traversed range (validated by arc-length integration)
        let lo = if self.t_range.0.is_finite() {
            inverse_monotone(map, self.t_range.0)?
        } else {
            f64::NEG_INFINITY
        };
        let hi = if self.t_range.1.is_finite() {
            inverse_monotone(map, self.t_range.1)?
        } else {
            f64::INFINITY
        };
        Curve2D::new(sub(&self.u)?, sub(&self.v)?, (lo, hi))
    }
}

/// Compose e(t) with t = m(x): textual substitution through the parser.
fn compose(e: &Expression, map: &Expression) -> Result<Expression, Error> {
    let var = map.vars()[0].clone();
    let src = e.to_string();
    let map_src = format!("({})", map);
    // replace the single variable of e by the map source; the variable of e
    // is a single identifier so a parse-level rebuild is simplest
    let rebuilt = replace_ident(&src, &e.vars()[0], &map_src);
    Ok(Expression::parse(&rebuilt, &[&var])?)
}

fn replace_ident(src: &str, ident: &str, with: &str) -> String {
    let mut out = String::with_capacity(src.len() + 16);
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_')
            {
                i += 1;
            }
            let word = &src[start..i];
            if word == ident {
                out.push_str(with);
            } else {
                out.push_str(word);
            }
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

/// Solve m(x) = target for monotone m by expanding bisection.
fn inverse_monotone(map: &Expression, target: f64) -> Result<f64, Error> {
    let f = |x: f64| -> Result<f64, Error> { Ok(map.eval(&[x])?) };
    let mut lo = -1.0;
    let mut hi = 1.0;
    for _ in 0..200 {
        if f(lo)? <= target {
            break;
        }
        lo *= 2.0;
    }
    for _ in 0..200 {
        if f(hi)? >= target {
            break;
        }
        hi *= 2.0;
    }
    if f(lo)? > target || f(hi)? < target {
        return Err(Error::invalid("parameter map does not reach interval bound"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Speed of the curve at parameter t in the given metric.
pub fn tangent_norm(metric: &Metric2D, curve: &Curve2D, t: f64) -> Result<f64, Error> {
    let (u, v) = curve.point(t)?;
    let (du, dv) = curve.velocity(t)?;
    metric.norm(u, v, du, dv)
}

/// Length of the curve over a finite parameter interval, by adaptive
/// quadrature of the speed (absolute error 1e-9).
pub fn curve_length(
    curve: &Curve2D,
    metric: &Metric2D,
    interval: (f64, f64),
) -> Result<f64, Error> {
    if !interval.0.is_finite() || !interval.1.is_finite() {
        return Err(Error::invalid("curve_length needs a finite interval"));
    }
    let r = quad::integrate(
        |t| tangent_norm(metric, curve, t),
        interval.0,
        interval.1,
        1e-9,
        1e-12,
        MAX_PANELS,
    )?;
    Ok(r.value)
}

/// Gaussian curvature -mu''(x)/mu(x) of the warped metric dx^2 + mu^2 dtheta^2.
pub fn warped_curvature(mu: &MuProfile, x: f64) -> Result<f64, Error> {
    let value = mu.value(x)?;
    if value <= REGULARITY_FLOOR {
        return Err(Error::MuNonPositive { x, value });
    }
    Ok(-mu.second_derivative(x)? / value)
}

/// Why an arc-length integration stopped before the requested extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalKind {
    /// The curve parameter reached the end of its declared interval.
    ParamBound,
    /// Curve speed fell below the regularity floor.
    RegularityFailure,
    /// The curve left the metric domain (or an expression faulted).
    DomainExit,
    /// Expression evaluation overflowed to NaN: the curve continues
    /// mathematically but cannot be evaluated further out.
    EvaluationHorizon,
}

#[derive(Debug, Clone, Copy)]
pub struct Terminal {
    pub s: f64,
    pub t: f64,
    pub kind: TerminalKind,
}

struct Integration {
    steps: Vec<DenseStep>,
    /// per-step unit-speed deviation at the midpoint checkpoint
    step_dev: Vec<f64>,
    s_end: f64,
    t_end: f64,
    k1: f64,
    h: f64,
    terminal: Option<Terminal>,
    max_speed_dev: f64,
    accepted: usize,
}

/// A curve reparameterized by arc length in one direction from an anchor.
///
/// The map t(s) is an adaptive ODE solution of dt/ds = sign / |c'(t)| with
/// dense output, extended lazily as larger s are queried. Queries are
/// reentrant; extension takes a write lock.
pub struct ArcLengthCurve {
    inner: Arc<ArcInner>,
}

impl Clone for ArcLengthCurve {
    fn clone(&self) -> Self {
        ArcLengthCurve { inner: self.inner.clone() }
    }
}

struct ArcInner {
    curve: Curve2D,
    metric: Metric2D,
    t0: f64,
    dir: Direction,
    opts: OdeOptions,
    state: RwLock<Integration>,
}

const MAX_ACCEPTED_STEPS: usize = 400_000;

impl ArcLengthCurve {
    /// Sets up the integration from t0; fails if the initial speed is not
    /// evaluable or not regular.
    pub fn new(
        curve: Curve2D,
        metric: Metric2D,
        t0: f64,
        dir: Direction,
    ) -> Result<ArcLengthCurve, Error> {
        // per-step tolerances sit well below the 1e-9 target: the
        // accumulated solution error over many steps must stay within it,
        // and the dense-output derivative (one order weaker than the
        // solution) must hold the 1e-8 unit-speed checkpoints
        let opts = OdeOptions { rel_tol: 1e-12, abs_tol: 1e-14, h_max: f64::INFINITY };
        Self::with_options(curve, metric, t0, dir, opts)
    }

    pub fn with_options(
        curve: Curve2D,
        metric: Metric2D,
        t0: f64,
        dir: Direction,
        opts: OdeOptions,
    ) -> Result<ArcLengthCurve, Error> {
        if !curve.contains(t0) {
            return Err(Error::invalid(format!(
                "anchor t0 = {t0} outside the curve parameter interval"
            )));
        }
        let speed = tangent_norm(&metric, &curve, t0)?;
        if speed < REGULARITY_FLOOR {
            return Err(Error::RegularityFailure { t: t0, speed });
        }
        let k1 = dir.sign() / speed;
        let h = ode::initial_step(t0, k1, &opts).max(1e-8);
        Ok(ArcLengthCurve {
            inner: Arc::new(ArcInner {
                curve,
                metric,
                t0,
                dir,
                opts,
                state: RwLock::new(Integration {
                    steps: Vec::new(),
                    step_dev: Vec::new(),
                    s_end: 0.0,
                    t_end: t0,
                    k1,
                    h,
                    terminal: None,
                    max_speed_dev: 0.0,
                    accepted: 0,
                }),
            }),
        })
    }

    pub fn direction(&self) -> Direction {
        self.inner.dir
    }

    pub fn anchor(&self) -> f64 {
        self.inner.t0
    }

    fn rhs(&self, t: f64) -> Result<f64, Error> {
        if !self.inner.curve.contains(t) {
            return Err(Error::OutsideDomain(t));
        }
        let speed = tangent_norm(&self.inner.metric, &self.inner.curve, t)?;
        if speed < REGULARITY_FLOOR {
            return Err(Error::RegularityFailure { t, speed });
        }
        if !speed.is_finite() {
            return Err(Error::NonFiniteIntegrand { at: t });
        }
        Ok(self.inner.dir.sign() / speed)
    }

    /// Extend the solution until it covers `s_target` or hits a terminal
    /// point; returns the covered extent.
    pub fn extend_to(&self, s_target: f64) -> Result<f64, Error> {
        {
            let st = self.inner.state.read().expect("lock");
            if st.s_end >= s_target || st.terminal.is_some() {
                return Ok(st.s_end);
            }
        }
        let mut st = self.inner.state.write().expect("lock");
        while st.s_end < s_target && st.terminal.is_none() {
            if st.accepted >= MAX_ACCEPTED_STEPS {
                return Err(Error::BudgetExhausted { s: st.s_end });
            }
            let h = st.h.max(f64::EPSILON * st.s_end.max(1.0));
            match ode::step(
                &|t| self.rhs(t),
                st.s_end,
                st.t_end,
                st.k1,
                h,
                &self.inner.opts,
            ) {
                Ok(out) => {
                    if out.accepted {
                        // unit-speed checkpoint at the step midpoint
                        let t_mid = out.dense.eval(0.5);
                        let mut dev = 0.0;
                        if let Ok(sp) = tangent_norm(&self.inner.metric, &self.inner.curve, t_mid)
                        {
                            dev = (sp * out.dense.eval_derivative(0.5).abs() - 1.0).abs();
                            if dev > st.max_speed_dev {
                                st.max_speed_dev = dev;
                            }
                        }
                        st.step_dev.push(dev);
                        st.s_end = out.dense.x_end();
                        st.t_end = out.y1;
                        st.k1 = out.f1;
                        st.accepted += 1;
                        st.steps.push(out.dense);
                    }
                    st.h = out.h_next;
                }
                Err(err) => {
                    // shrink toward the failure boundary; when the step
                    // underflows, record the terminal point
                    if h <= (st.s_end.abs().max(1.0)) * 1e-14 {
                        let kind = match err {
                            Error::OutsideDomain(_) => TerminalKind::ParamBound,
                            Error::RegularityFailure { .. } => TerminalKind::RegularityFailure,
                            Error::NonFiniteIntegrand { .. } => TerminalKind::EvaluationHorizon,
                            Error::Eval(e)
                                if matches!(e.fault, crate::expr::EvalFault::NonFinite) =>
                            {
                                TerminalKind::EvaluationHorizon
                            }
                            _ => TerminalKind::DomainExit,
                        };
                        st.terminal = Some(Terminal { s: st.s_end, t: st.t_end, kind });
                    } else {
                        st.h = h * 0.5;
                    }
                }
            }
        }
        Ok(st.s_end)
    }

    /// Terminal info if the integration stopped, after trying to reach
    /// `s_target`.
    pub fn probe_end(&self, s_target: f64) -> Result<Option<Terminal>, Error> {
        self.extend_to(s_target)?;
        Ok(self.inner.state.read().expect("lock").terminal)
    }

    /// Covered arc-length extent so far.
    pub fn extent(&self) -> f64 {
        self.inner.state.read().expect("lock").s_end
    }

    /// Curve parameter at arc length s >= 0 (extends lazily).
    pub fn t_at(&self, s: f64) -> Result<f64, Error> {
        if s < 0.0 {
            return Err(Error::invalid("arc length must be non-negative"));
        }
        if s == 0.0 {
            return Ok(self.inner.t0);
        }
        let reached = self.extend_to(s)?;
        if reached < s {
            return Err(self.beyond_end_error(s, reached));
        }
        let st = self.inner.state.read().expect("lock");
        let idx = st
            .steps
            .partition_point(|step| step.x_end() < s)
            .min(st.steps.len() - 1);
        let step = &st.steps[idx];
        let theta = ((s - step.x0) / step.h).clamp(0.0, 1.0);
        Ok(step.eval(theta))
    }

    /// Queries past an evaluation horizon are a budget condition (callers
    /// may finalize with the data they have); past a genuine curve end
    /// they are a domain error.
    fn beyond_end_error(&self, s: f64, reached: f64) -> Error {
        let st = self.inner.state.read().expect("lock");
        match st.terminal {
            Some(Terminal { kind: TerminalKind::EvaluationHorizon, .. }) => {
                Error::BudgetExhausted { s: reached }
            }
            _ => Error::OutsideDomain(s),
        }
    }

    /// dt/ds at arc length s (from the dense interpolant).
    pub fn t_derivative_at(&self, s: f64) -> Result<f64, Error> {
        if s < 0.0 {
            return Err(Error::OutsideDomain(s));
        }
        let reached = self.extend_to(s)?;
        if reached < s {
            return Err(self.beyond_end_error(s, reached));
        }
        let st = self.inner.state.read().expect("lock");
        if st.steps.is_empty() {
            return Ok(st.k1);
        }
        let idx = st
            .steps
            .partition_point(|step| step.x_end() < s)
            .min(st.steps.len() - 1);
        let step = &st.steps[idx];
        let theta = ((s - step.x0) / step.h).clamp(0.0, 1.0);
        Ok(step.eval_derivative(theta))
    }

    /// Worst observed |speed * t'(s) - 1| at step-midpoint checkpoints.
    pub fn max_unit_speed_deviation(&self) -> f64 {
        self.inner.state.read().expect("lock").max_speed_dev
    }

    /// Worst checkpoint deviation over steps starting within [0, s_limit].
    pub fn max_unit_speed_deviation_upto(&self, s_limit: f64) -> f64 {
        let st = self.inner.state.read().expect("lock");
        let mut max = 0.0f64;
        for (step, dev) in st.steps.iter().zip(&st.step_dev) {
            if step.x0 > s_limit {
                break;
            }
            if *dev > max {
                max = *dev;
            }
        }
        max
    }

    /// Base point of the curve at arc length s.
    pub fn point_at(&self, s: f64) -> Result<(f64, f64), Error> {
        self.inner.curve.point(self.t_at(s)?)
    }
}

/// Solve dt/ds = sign / |c'(t)| from t0 (relative tolerance 1e-9, absolute
/// 1e-12) and hand back the dense solution.
pub fn arclength_reparam(
    curve: &Curve2D,
    metric: &Metric2D,
    t0: f64,
    dir: Direction,
) -> Result<ArcLengthCurve, Error> {
    ArcLengthCurve::new(curve.clone(), metric.clone(), t0, dir)
}
