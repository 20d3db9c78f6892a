//! Improper-integral divergence detection over dyadically expanding (or,
//! toward a finite endpoint, dyadically shrinking) windows.
//!
//! A definite verdict needs corroborating evidence:
//! - Divergent: the partial integral crossed the divergence threshold, or
//!   the fitted tail is a power with p <= 1 - margin (>= 1 + margin at a
//!   finite endpoint), or the dyadic increments stopped decreasing
//!   (logarithmic growth or worse).
//! - Convergent: increments passed the Cauchy test and the fitted tail is
//!   a power with p >= 1 + margin (<= 1 - margin at an endpoint) or a
//!   decaying exponential; increments below the hard Cauchy floor are
//!   accepted on their own.
//!
//! Anything else after the window budget is Inconclusive: the boundary
//! family 1/(s log s) cannot be decided by finite sampling and a wrong
//! definite answer is worse than no answer.

use crate::error::Error;
use crate::geom::Direction;
use crate::numeric::fit::{fit_line, LineFit};
use crate::numeric::{quad, MAX_PANELS};
use crate::profile::MuProfile;

use super::Policy;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailVerdict {
    Divergent,
    Convergent,
    Inconclusive,
}

impl TailVerdict {
    pub fn name(self) -> &'static str {
        match self {
            TailVerdict::Divergent => "divergent",
            TailVerdict::Convergent => "convergent",
            TailVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Fitted model of the integrand on the last examined window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// f ~ c * d^-p in the distance d along the tail.
    Power { p: f64, r2: f64 },
    /// f ~ c * exp(-rate * d).
    Exponential { rate: f64 },
    None,
}

/// Divergence evidence for one tail.
#[derive(Debug, Clone)]
pub struct DivergenceVerdict {
    pub verdict: TailVerdict,
    /// (s at window end, partial integral) per completed window;
    /// nondecreasing in the second component.
    pub trace: Vec<(f64, f64)>,
    pub model: TailModel,
    /// Index of the last completed window.
    pub window_reached: usize,
    /// For Convergent: accumulated value plus the fitted-tail remainder.
    pub finite_value: Option<f64>,
    pub warnings: Vec<String>,
}

/// How fit exponents map to verdicts. For a tail running to infinity,
/// f ~ d^-p diverges when p <= 1; approaching a finite endpoint the
/// inequality flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Infinite,
    Endpoint,
}

struct Fits {
    power: Option<LineFit>,
    exponential: Option<LineFit>,
    window_width: f64,
}

impl Fits {
    fn none() -> Fits {
        Fits { power: None, exponential: None, window_width: 0.0 }
    }

    fn model(&self, policy: &Policy) -> TailModel {
        let pow_ok = self.power.filter(|f| f.rms <= policy.fit_rms_tol);
        let exp_ok = self
            .exponential
            .filter(|f| f.rms <= policy.fit_rms_tol && decisive_exp(f, self.window_width));
        match (pow_ok, exp_ok) {
            (Some(p), Some(e)) if p.rms <= e.rms => TailModel::Power { p: -p.slope, r2: p.r2 },
            (_, Some(e)) => TailModel::Exponential { rate: -e.slope },
            (Some(p), None) => TailModel::Power { p: -p.slope, r2: p.r2 },
            (None, None) => TailModel::None,
        }
    }

    fn decisive_convergent(&self, mode: Mode, policy: &Policy) -> bool {
        if let Some(p) = self.power.filter(|f| f.rms <= policy.fit_rms_tol) {
            let exponent = -p.slope;
            let hit = match mode {
                Mode::Infinite => exponent >= 1.0 + policy.p_margin,
                Mode::Endpoint => exponent <= 1.0 - policy.p_margin,
            };
            if hit {
                return true;
            }
        }
        if mode == Mode::Infinite {
            if let Some(e) = self.exponential.filter(|f| f.rms <= policy.fit_rms_tol) {
                if -e.slope > 0.0 && decisive_exp(&e, self.window_width) {
                    return true;
                }
            }
        }
        false
    }

    fn decisive_divergent(&self, mode: Mode, policy: &Policy) -> bool {
        if let Some(p) = self.power.filter(|f| f.rms <= policy.fit_rms_tol) {
            let exponent = -p.slope;
            return match mode {
                Mode::Infinite => exponent <= 1.0 - policy.p_margin,
                Mode::Endpoint => exponent >= 1.0 + policy.p_margin,
            };
        }
        false
    }

    /// Remainder of the integral beyond distance `d_edge` under the fitted
    /// model, used to report the finite value of a convergent tail.
    fn remainder(&self, mode: Mode, d_edge: f64, policy: &Policy) -> Option<f64> {
        if mode == Mode::Endpoint {
            // remaining gap shrinks to zero: integral of c*d^-q over (0, d]
            let p = self.power.filter(|f| f.rms <= policy.fit_rms_tol)?;
            let q = -p.slope;
            if q < 1.0 {
                let c = p.intercept.exp();
                let r = c * d_edge.powf(1.0 - q) / (1.0 - q);
                return r.is_finite().then_some(r);
            }
            return None;
        }
        let pow = self.power.filter(|f| f.rms <= policy.fit_rms_tol);
        let exp = self.exponential.filter(|f| f.rms <= policy.fit_rms_tol);
        if let Some(e) = exp {
            let rate = -e.slope;
            if rate > 0.0 && decisive_exp(&e, self.window_width) {
                let c = e.intercept.exp();
                let r = c * (-rate * d_edge).exp() / rate;
                if r.is_finite() {
                    return Some(r);
                }
            }
        }
        if let Some(p) = pow {
            let q = -p.slope;
            if q > 1.0 {
                let c = p.intercept.exp();
                let r = c * d_edge.powf(1.0 - q) / (q - 1.0);
                if r.is_finite() {
                    return Some(r);
                }
            }
        }
        None
    }
}

/// An exponential fit only counts as decay evidence when it predicts at
/// least a factor-4 drop across the window.
fn decisive_exp(fit: &LineFit, window_width: f64) -> bool {
    -fit.slope * window_width >= (4.0f64).ln()
}

/// Sample the integrand at geometrically spaced distances inside the last
/// window and fit log f against log d and against d.
fn fit_window<F>(
    f: &F,
    s_of_d: impl Fn(f64) -> f64,
    d_lo: f64,
    d_hi: f64,
    fit_exponential: bool,
    policy: &Policy,
) -> Result<Fits, Error>
where
    F: Fn(f64) -> Result<f64, Error>,
{
    let n = policy.fit_points.max(6);
    let d_lo = d_lo.max(d_hi * 1e-6);
    let ratio = (d_hi / d_lo).max(1.0 + 1e-12);
    let mut log_d = Vec::with_capacity(n);
    let mut d_raw = Vec::with_capacity(n);
    let mut log_f = Vec::with_capacity(n);
    for i in 0..n {
        let d = d_lo * ratio.powf(i as f64 / (n - 1) as f64);
        let value = match f(s_of_d(d)) {
            Ok(v) => v,
            Err(Error::BudgetExhausted { .. }) | Err(Error::NonFiniteIntegrand { .. }) => continue,
            Err(e) => return Err(e),
        };
        if value > 0.0 && value.is_finite() {
            log_d.push(d.ln());
            d_raw.push(d);
            log_f.push(value.ln());
        }
    }
    if log_f.len() < 4 {
        return Ok(Fits::none());
    }
    Ok(Fits {
        power: fit_line(&log_d, &log_f),
        exponential: if fit_exponential {
            fit_line(&d_raw, &log_f)
        } else {
            None
        },
        window_width: d_hi - d_lo,
    })
}

struct Engine<'a> {
    policy: &'a Policy,
    mode: Mode,
    partial: f64,
    trace: Vec<(f64, f64)>,
    increments: Vec<f64>,
    warnings: Vec<String>,
    fits: Fits,
    d_edge: f64,
}

enum WindowOutcome {
    Continue,
    Stop(TailVerdict),
}

impl<'a> Engine<'a> {
    fn new(policy: &'a Policy, mode: Mode) -> Engine<'a> {
        Engine {
            policy,
            mode,
            partial: 0.0,
            trace: Vec::new(),
            increments: Vec::new(),
            warnings: Vec::new(),
            fits: Fits::none(),
            d_edge: 0.0,
        }
    }

    fn absorb(&mut self, k: usize, s_end: f64, d_edge: f64, inc: f64, fits: Fits) -> WindowOutcome {
        let mut inc = inc;
        if inc < 0.0 {
            // quadrature round-off on a nonnegative integrand
            if inc.abs() <= 1e-12 * self.partial.abs().max(1.0) {
                inc = 0.0;
            }
        }
        self.partial += inc;
        self.increments.push(inc);
        self.trace.push((s_end, self.partial));
        self.fits = fits;
        self.d_edge = d_edge;

        if self.partial > self.policy.divergence_threshold {
            return WindowOutcome::Stop(TailVerdict::Divergent);
        }
        let n = self.increments.len();
        if n >= 2 {
            let last2 = &self.increments[n - 2..];
            if last2.iter().all(|i| *i <= self.policy.hard_cauchy_abs) {
                return WindowOutcome::Stop(TailVerdict::Convergent);
            }
            let cauchy_scale = self.policy.cauchy_rel * self.partial.abs().max(1.0);
            if k >= 2
                && last2.iter().all(|i| *i <= cauchy_scale)
                && self.fits.decisive_convergent(self.mode, self.policy)
            {
                return WindowOutcome::Stop(TailVerdict::Convergent);
            }
        }
        WindowOutcome::Continue
    }

    /// Value-only refinement after a convergent decision: accumulate and
    /// keep the farthest usable fit for the remainder estimate.
    fn absorb_refinement(&mut self, s_end: f64, d_edge: f64, inc: f64, fits: Fits) {
        self.partial += inc.max(0.0);
        self.trace.push((s_end, self.partial));
        // adopt the new fit (and its extrapolation edge) only when a model
        // actually fits; windows degraded by evaluation edge effects would
        // otherwise clobber a clean earlier fit. Keeping the old edge can
        // double-count at most the refined increments, which are at the
        // Cauchy floor by construction.
        let usable = fits
            .power
            .map(|f| f.rms <= self.policy.fit_rms_tol)
            .unwrap_or(false)
            || fits
                .exponential
                .map(|f| f.rms <= self.policy.fit_rms_tol)
                .unwrap_or(false);
        if usable {
            self.fits = fits;
            self.d_edge = d_edge;
        }
    }

    /// Verdict when the window budget is exhausted (or evaluation ran out
    /// of reachable extent).
    fn final_verdict(&self) -> TailVerdict {
        if self.fits.decisive_divergent(self.mode, self.policy) {
            return TailVerdict::Divergent;
        }
        // truncated but decisive decay still counts when the increments
        // already collapsed
        let n = self.increments.len();
        if n >= 2
            && self.increments[n - 2..]
                .iter()
                .all(|i| *i <= self.policy.hard_cauchy_abs)
        {
            return TailVerdict::Convergent;
        }
        if let Some(last) = self.increments.last() {
            let scale = (self.policy.cauchy_rel * self.partial.abs().max(1.0))
                .max(self.policy.hard_cauchy_abs);
            if *last <= scale && self.fits.decisive_convergent(self.mode, self.policy) {
                return TailVerdict::Convergent;
            }
        }
        // log growth or worse: dyadic increments that stopped decreasing
        let n = self.increments.len();
        if n >= 4 {
            let tol = 1.0 - self.policy.growth_ratio_tol;
            let non_decreasing = (n - 3..n).all(|i| {
                let prev = self.increments[i - 1];
                prev > 0.0 && self.increments[i] >= prev * tol
            });
            if non_decreasing && !self.fits.decisive_convergent(self.mode, self.policy) {
                return TailVerdict::Divergent;
            }
        }
        TailVerdict::Inconclusive
    }

    fn finish(mut self, verdict: TailVerdict, window_reached: usize) -> DivergenceVerdict {
        let finite_value = if verdict == TailVerdict::Convergent {
            let remainder = self
                .fits
                .remainder(self.mode, self.d_edge, self.policy)
                .unwrap_or(0.0);
            Some(self.partial + remainder)
        } else {
            None
        };
        let model = self.fits.model(self.policy);
        self.warnings.dedup();
        DivergenceVerdict {
            verdict,
            trace: self.trace,
            model,
            window_reached,
            finite_value,
            warnings: self.warnings,
        }
    }
}

enum WindowQuad {
    Full(f64),
    /// The window could only be integrated up to an evaluation horizon;
    /// the increment covers the evaluable prefix and the run stops here.
    Last(f64),
}

fn window_quad<F>(
    f: &F,
    near: f64,
    far: f64,
    k: usize,
    policy: &Policy,
    warnings: &mut Vec<String>,
) -> Result<WindowQuad, Error>
where
    F: Fn(f64) -> Result<f64, Error>,
{
    let (lo, hi) = (near.min(far), near.max(far));
    match quad::integrate(f, lo, hi, policy.quad_abs_tol, policy.quad_rel_tol, MAX_PANELS) {
        Ok(r) => {
            if !r.converged {
                warnings.push(format!(
                    "quadrature tolerance not met in window {k} (error estimate {:.3e})",
                    r.abs_error
                ));
            }
            Ok(WindowQuad::Full(r.value))
        }
        Err(Error::BudgetExhausted { s }) => {
            warnings.push(format!(
                "arc-length extension budget exhausted near s = {s:.6e}; verdict uses windows up to there"
            ));
            Ok(WindowQuad::Last(0.0))
        }
        // overflow horizon inside the window: keep the evaluable prefix
        // as evidence (first-window faults propagate)
        Err(Error::NonFiniteIntegrand { .. }) if k > 0 => {
            let edge = evaluable_edge(f, near, far);
            let prefix = if (edge - near).abs() > 0.0 {
                quad::integrate(
                    f,
                    near.min(edge),
                    near.max(edge),
                    policy.quad_abs_tol,
                    policy.quad_rel_tol,
                    MAX_PANELS,
                )
                .map(|r| r.value)
                .unwrap_or(0.0)
            } else {
                0.0
            };
            warnings.push(format!(
                "integrand not evaluable beyond s = {edge:.6e} (overflow); verdict uses windows up to there"
            ));
            Ok(WindowQuad::Last(prefix))
        }
        Err(e) => Err(e),
    }
}

/// Largest point toward `far` at which the field is still finite, found by
/// bisection from the evaluable `near` end.
fn evaluable_edge<F>(f: &F, near: f64, far: f64) -> f64
where
    F: Fn(f64) -> Result<f64, Error>,
{
    let ok = |x: f64| matches!(f(x), Ok(v) if v.is_finite());
    if ok(far) {
        // interior fault only; fall back to a conservative half window
        return near + 0.5 * (far - near);
    }
    let (mut a, mut b) = (near, far);
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if ok(m) {
            a = m;
        } else {
            b = m;
        }
    }
    // stay strictly inside the evaluable region
    a - (a - near) * 1e-9
}

/// Extra windows integrated after a convergent exit so the reported
/// finite value carries most of the remaining mass.
const REFINE_WINDOWS: usize = 6;

/// Integrate a positive scalar field over dyadically expanding windows
/// [s0, s0 +/- 2^k w0] and classify the improper integral toward infinity.
pub fn tail_integral<F>(
    f: F,
    s0: f64,
    dir: Direction,
    policy: &Policy,
) -> Result<DivergenceVerdict, Error>
where
    F: Fn(f64) -> Result<f64, Error>,
{
    let sign = dir.sign();
    let w0 = policy.window_base;
    let mut engine = Engine::new(policy, Mode::Infinite);
    let mut k = 0usize;

    let one_window = |k: usize,
                      engine: &mut Engine<'_>|
     -> Result<(WindowQuad, f64, f64, Fits), Error> {
        let d_lo = if k == 0 { 0.0 } else { w0 * exp2(k - 1) };
        let d_hi = w0 * exp2(k);
        let s_lo = s0 + sign * d_lo;
        let s_hi = s0 + sign * d_hi;
        let wq = window_quad(&f, s_lo, s_hi, k, policy, &mut engine.warnings)?;
        let fits = if k == 0 {
            Fits::none()
        } else {
            match fit_window(&f, |d| s0 + sign * d, d_lo, d_hi, true, policy) {
                Ok(fits) => fits,
                Err(Error::BudgetExhausted { .. }) => Fits::none(),
                Err(e) => return Err(e),
            }
        };
        Ok((wq, s_hi, d_hi, fits))
    };

    loop {
        let (inc, s_end, d_edge, fits) = match one_window(k, &mut engine)? {
            (WindowQuad::Full(inc), s_end, d_edge, fits) => (inc, s_end, d_edge, fits),
            (WindowQuad::Last(prefix), s_end, d_edge, fits) => {
                let _ = engine.absorb(k, s_end, d_edge, prefix, fits);
                let verdict = engine.final_verdict();
                return Ok(engine.finish(verdict, k));
            }
        };
        match engine.absorb(k, s_end, d_edge, inc, fits) {
            WindowOutcome::Stop(TailVerdict::Convergent) => {
                for extra in 1..=REFINE_WINDOWS {
                    match one_window(k + extra, &mut engine)? {
                        (WindowQuad::Full(inc), s_end, d_edge, fits) => {
                            engine.absorb_refinement(s_end, d_edge, inc, fits)
                        }
                        (WindowQuad::Last(inc), s_end, d_edge, fits) => {
                            engine.absorb_refinement(s_end, d_edge, inc, fits);
                            break;
                        }
                    }
                }
                return Ok(engine.finish(TailVerdict::Convergent, k));
            }
            WindowOutcome::Stop(v) => return Ok(engine.finish(v, k)),
            WindowOutcome::Continue => {}
        }
        if k >= policy.k_max {
            let verdict = engine.final_verdict();
            return Ok(engine.finish(verdict, k));
        }
        k += 1;
    }
}

/// Improper integral of a positive field from s0 toward a finite endpoint
/// `b`: windows halve the remaining gap, so the fit distance is the gap to
/// the endpoint. Divergent means the endpoint is at infinite integral
/// (e.g. infinite conformal length toward an axis).
pub fn endpoint_integral<F>(
    f: F,
    s0: f64,
    b: f64,
    policy: &Policy,
) -> Result<DivergenceVerdict, Error>
where
    F: Fn(f64) -> Result<f64, Error>,
{
    if s0 == b {
        return Err(Error::invalid("endpoint integral needs s0 != b"));
    }
    let gap = b - s0; // signed
    let mut engine = Engine::new(policy, Mode::Endpoint);
    // stop once the remaining gap is at float resolution
    let j_hard = 48usize;
    let j_max = policy.k_max.min(j_hard);
    let mut j = 0usize;

    enum W {
        Window(f64, f64, f64, Fits),
        Last(f64, f64, f64, Fits),
        Resolution,
    }
    let one_window = |j: usize, engine: &mut Engine<'_>| -> Result<W, Error> {
        // window j covers remaining-gap fractions [2^-j, 2^-j-1]
        let d_far = gap.abs() / exp2(j);
        let d_near = gap.abs() / exp2(j + 1);
        let s_far = b - gap.signum() * d_far;
        let s_near = b - gap.signum() * d_near;
        if (s_far - s_near).abs() <= b.abs().max(1.0) * 1e-15 {
            return Ok(W::Resolution);
        }
        let wq = window_quad(&f, s_far, s_near, j, policy, &mut engine.warnings)?;
        let fits = if j == 0 {
            Fits::none()
        } else {
            match fit_window(&f, |d| b - gap.signum() * d, d_near, d_far, false, policy) {
                Ok(fits) => fits,
                Err(Error::BudgetExhausted { .. }) => Fits::none(),
                Err(e) => return Err(e),
            }
        };
        Ok(match wq {
            WindowQuad::Full(inc) => W::Window(inc, s_near, d_near, fits),
            WindowQuad::Last(inc) => W::Last(inc, s_near, d_near, fits),
        })
    };

    loop {
        let (inc, s_end, d_edge, fits) = match one_window(j, &mut engine)? {
            W::Window(inc, s_end, d_edge, fits) => (inc, s_end, d_edge, fits),
            W::Last(inc, s_end, d_edge, fits) => {
                let _ = engine.absorb(j, s_end, d_edge, inc, fits);
                let verdict = engine.final_verdict();
                return Ok(engine.finish(verdict, j));
            }
            W::Resolution => {
                let verdict = engine.final_verdict();
                return Ok(engine.finish(verdict, j.saturating_sub(1)));
            }
        };
        match engine.absorb(j, s_end, d_edge, inc, fits) {
            WindowOutcome::Stop(TailVerdict::Convergent) => {
                for extra in 1..=REFINE_WINDOWS {
                    match one_window(j + extra, &mut engine)? {
                        W::Window(inc, s_end, d_edge, fits) => {
                            engine.absorb_refinement(s_end, d_edge, inc, fits)
                        }
                        W::Last(inc, s_end, d_edge, fits) => {
                            engine.absorb_refinement(s_end, d_edge, inc, fits);
                            break;
                        }
                        W::Resolution => break,
                    }
                }
                return Ok(engine.finish(TailVerdict::Convergent, j));
            }
            WindowOutcome::Stop(v) => return Ok(engine.finish(v, j)),
            WindowOutcome::Continue => {}
        }
        if j >= j_max {
            let verdict = engine.final_verdict();
            return Ok(engine.finish(verdict, j));
        }
        j += 1;
    }
}

fn exp2(k: usize) -> f64 {
    (2.0f64).powi(k as i32)
}

/// Result of a zero scan.
#[derive(Debug, Clone)]
pub struct ZeroScan {
    pub zeros: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Locate zeros of mu on a finite interval: sign changes are refined by
/// bisection, near-zero touching minima by ternary search. More than two
/// zeros is geometrically impossible for a connected invariant surface and
/// is flagged, not fixed.
pub fn detect_zeros(
    mu: &MuProfile,
    interval: (f64, f64),
    n_points: usize,
) -> Result<ZeroScan, Error> {
    let (lo, hi) = interval;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("zero scan needs a finite, ordered interval"));
    }
    let n = n_points.max(16);
    let mut xs = Vec::with_capacity(n + 1);
    let mut vs = Vec::with_capacity(n + 1);
    let mut warnings = Vec::new();
    let mut saw_nonfinite = false;
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        xs.push(x);
        let v = mu.value(x)?;
        saw_nonfinite |= !v.is_finite();
        vs.push(v);
    }
    if saw_nonfinite {
        warnings.push("mu overflows on part of the scanned interval".into());
    }
    let scale = vs
        .iter()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        warnings.push("mu is identically zero on the scanned interval".into());
        return Ok(ZeroScan { zeros: vec![], warnings });
    }
    // near-zero minima are judged against the local sample scale so that
    // profiles with huge dynamic range do not flag their small-value side
    let local_scale = |i: usize| -> f64 {
        let lo_i = i.saturating_sub(8);
        let hi_i = (i + 8).min(n);
        vs[lo_i..=hi_i]
            .iter()
            .filter(|v| v.is_finite())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    };
    let mut zeros: Vec<f64> = Vec::new();

    let push = |z: f64, zeros: &mut Vec<f64>| {
        let res = (hi - lo) / n as f64 * 1e-3 + 1e-12;
        if !zeros.iter().any(|y| (y - z).abs() <= res.max(1e-9 * z.abs())) {
            zeros.push(z);
        }
    };

    for i in 0..n {
        let (a, b) = (xs[i], xs[i + 1]);
        let (fa, fb) = (vs[i], vs[i + 1]);
        if !fa.is_finite() || !fb.is_finite() {
            continue;
        }
        let threshold = 1e-10 * local_scale(i).max(f64::MIN_POSITIVE);
        if fa == 0.0 {
            push(a, &mut zeros);
            continue;
        }
        if fa * fb < 0.0 {
            // bisection on the sign change
            let (mut a, mut b, mut fa) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m == a || m == b {
                    break;
                }
                let fm = mu.value(m)?;
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa * fm < 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            push(0.5 * (a + b), &mut zeros);
        } else if fa.abs() < threshold
            && (i == 0 || vs[i - 1].abs() >= fa.abs())
            && fb.abs() >= fa.abs()
        {
            // near-zero local minimum of |mu|: refine by ternary search
            let mut a = if i == 0 { xs[0] } else { xs[i - 1] };
            let mut b = xs[i + 1];
            for _ in 0..200 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                if m1 >= m2 {
                    break;
                }
                if mu.value(m1)?.abs() <= mu.value(m2)?.abs() {
                    b = m2;
                } else {
                    a = m1;
                }
            }
            let z = 0.5 * (a + b);
            if mu.value(z)?.abs() < threshold {
                push(z, &mut zeros);
            }
        }
    }
    if vs[n] == 0.0 {
        push(xs[n], &mut zeros);
    }
    zeros.sort_by(f64::total_cmp);
    if zeros.len() > 2 {
        warnings.push(format!(
            "{} zeros of mu detected; a connected invariant surface admits at most two",
            zeros.len()
        ));
    }
    Ok(ZeroScan { zeros, warnings })
}

/// Windowed sup/inf scan with growth-fit gating, shared by the bounded-mu
/// shortcut (sup of mu stabilizes, fitted growth exponent ~ 0) and the
/// positive-lower-bound shortcut for conformal speeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ScanKind {
    SupBounded,
    InfPositive,
}

const SCAN_WINDOWS: usize = 15;
const SCAN_SAMPLES: usize = 48;
/// A claimed bound is verdict-relevant only against growth or decay with
/// exponent near 1, so the gate tolerates small fitted slopes.
const SCAN_SLOPE_TOL: f64 = 0.08;

/// Returns the witnessed bound when the evidence supports it: for
/// `SupBounded`, sup of the field stabilized and its fitted growth
/// exponent (upper confidence) stays ~ 0; for `InfPositive`, likewise with
/// inf and the lower confidence of the exponent.
pub(crate) fn windowed_bound_evidence<F>(
    f: &F,
    s0: f64,
    dir: Direction,
    kind: ScanKind,
    policy: &Policy,
) -> Result<Option<f64>, Error>
where
    F: Fn(f64) -> Result<f64, Error>,
{
    let sign = dir.sign();
    let w0 = policy.window_base;
    // growth is fitted on per-window means of log f: oscillation averages
    // out inside a window, and the phase-correlated small windows carry no
    // growth information and are skipped
    let mut agg_d = Vec::new();
    let mut agg_f = Vec::new();
    let mut window_ext: Vec<f64> = Vec::new(); // per-window sup or inf
    let mut global: Option<f64> = None;

    for k in 0..=SCAN_WINDOWS {
        let d_lo = if k == 0 { w0 * 1e-3 } else { w0 * exp2(k - 1) };
        let d_hi = w0 * exp2(k);
        let ratio = d_hi / d_lo;
        let mut ext: Option<f64> = None;
        let mut log_sum = 0.0f64;
        let mut log_n = 0usize;
        for i in 0..SCAN_SAMPLES {
            let d = d_lo * ratio.powf(i as f64 / (SCAN_SAMPLES - 1) as f64);
            let v = match f(s0 + sign * d) {
                Ok(v) => v,
                Err(Error::BudgetExhausted { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            if !v.is_finite() {
                return Ok(None);
            }
            ext = Some(match (ext, kind) {
                (None, _) => v,
                (Some(m), ScanKind::SupBounded) => m.max(v),
                (Some(m), ScanKind::InfPositive) => m.min(v),
            });
            if v > 0.0 {
                log_sum += v.ln();
                log_n += 1;
            } else if kind == ScanKind::InfPositive {
                return Ok(None);
            }
        }
        if k >= 3 && log_n >= SCAN_SAMPLES / 2 {
            agg_d.push((d_lo * d_hi).sqrt().ln());
            agg_f.push(log_sum / log_n as f64);
        }
        let ext = ext.expect("samples");
        window_ext.push(ext);
        global = Some(match (global, kind) {
            (None, _) => ext,
            (Some(g), ScanKind::SupBounded) => g.max(ext),
            (Some(g), ScanKind::InfPositive) => g.min(ext),
        });
    }
    let global = global.expect("windows");
    if kind == ScanKind::InfPositive && !(global > 0.0) {
        return Ok(None);
    }

    // stability: the last three windows must not move the bound seen over
    // the earlier windows
    let head = &window_ext[..window_ext.len() - 3];
    let stable = match kind {
        ScanKind::SupBounded => {
            let head_sup = head.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            global <= head_sup * (1.0 + 1e-3) + 1e-300
        }
        ScanKind::InfPositive => {
            let head_inf = head.iter().cloned().fold(f64::INFINITY, f64::min);
            global >= head_inf * (1.0 - 1e-3)
        }
    };
    if !stable {
        return Ok(None);
    }
    // growth gate: fitted exponent of the field over the scanned decades
    let fit = match fit_line(&agg_d, &agg_f) {
        Some(fit) => fit,
        None => return Ok(None),
    };
    let ok = match kind {
        ScanKind::SupBounded => fit.slope + 2.0 * fit.slope_se <= SCAN_SLOPE_TOL,
        ScanKind::InfPositive => fit.slope - 2.0 * fit.slope_se >= -SCAN_SLOPE_TOL,
    };
    Ok(ok.then_some(global))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;

    fn policy() -> Policy {
        Policy::default()
    }

    fn ok(f: impl Fn(f64) -> f64) -> impl Fn(f64) -> Result<f64, Error> {
        move |x| Ok(f(x))
    }

    #[test]
    fn harmonic_tail_diverges() {
        let v = tail_integral(ok(|s| 1.0 / s), 1.0, Direction::Plus, &policy()).unwrap();
        assert_eq!(v.verdict, TailVerdict::Divergent);
        if let TailModel::Power { p, .. } = v.model {
            assert!((p - 1.0).abs() < 0.02, "fitted p = {p}");
        } else {
            panic!("expected power model, got {:?}", v.model);
        }
    }

    #[test]
    fn inverse_square_converges() {
        let v = tail_integral(ok(|s| 1.0 / (s * s)), 1.0, Direction::Plus, &policy()).unwrap();
        assert_eq!(v.verdict, TailVerdict::Convergent);
        if let TailModel::Power { p, .. } = v.model {
            assert!((p - 2.0).abs() < 0.05, "fitted p = {p}");
        }
        let total = v.finite_value.unwrap();
        assert!((total - 1.0).abs() < 1e-3, "finite value {total}");
    }

    #[test]
    fn log_boundary_never_convergent() {
        let v = tail_integral(
            ok(|s| 1.0 / (s * s.ln())),
            2.0,
            Direction::Plus,
            &policy(),
        )
        .unwrap();
        assert_ne!(v.verdict, TailVerdict::Convergent);
    }

    #[test]
    fn sol3_profile_tail_converges() {
        // e^{-s sin(theta0)} / tan(theta0), theta0 = pi/4
        let theta: f64 = std::f64::consts::FRAC_PI_4;
        let v = tail_integral(
            ok(move |s: f64| (-s * theta.sin()).exp() / theta.tan()),
            0.0,
            Direction::Plus,
            &policy(),
        )
        .unwrap();
        assert_eq!(v.verdict, TailVerdict::Convergent);
    }

    #[test]
    fn calibration_family() {
        for (p, expect) in [
            (0.5, Some(TailVerdict::Divergent)),
            (0.8, Some(TailVerdict::Divergent)),
            (1.2, Some(TailVerdict::Convergent)),
            (1.5, Some(TailVerdict::Convergent)),
            (2.0, Some(TailVerdict::Convergent)),
            (0.95, None),
            (1.05, None),
        ] {
            let v =
                tail_integral(ok(move |s: f64| s.powf(-p)), 1.0, Direction::Plus, &policy())
                    .unwrap();
            match expect {
                Some(want) => assert_eq!(v.verdict, want, "p = {p}"),
                None => {
                    // wrong definite verdicts forbidden on the boundary band
                    let wrong = if p < 1.0 {
                        TailVerdict::Convergent
                    } else {
                        TailVerdict::Divergent
                    };
                    assert_ne!(v.verdict, wrong, "p = {p}");
                }
            }
        }
    }

    #[test]
    fn minus_direction_mirror() {
        let v = tail_integral(
            ok(|s: f64| s.abs().powf(-1.5)),
            -1.0,
            Direction::Minus,
            &policy(),
        )
        .unwrap();
        assert_eq!(v.verdict, TailVerdict::Convergent);
    }

    #[test]
    fn trace_is_nondecreasing() {
        let v = tail_integral(ok(|s: f64| 1.0 / (1.0 + s * s)), 0.0, Direction::Plus, &policy())
            .unwrap();
        for w in v.trace.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
    }

    #[test]
    fn endpoint_log_divergence() {
        // speed ~ 1/t toward t = 0: infinite length
        let v = endpoint_integral(ok(|t: f64| 2.0 / t), 1.0, 0.0, &policy()).unwrap();
        assert_eq!(v.verdict, TailVerdict::Divergent);
    }

    #[test]
    fn endpoint_finite_length() {
        // bounded speed toward a finite endpoint: finite length
        let v = endpoint_integral(ok(|_t: f64| 1.0), 0.0, 1.0, &policy()).unwrap();
        assert_eq!(v.verdict, TailVerdict::Convergent);
        assert!((v.finite_value.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn endpoint_integrable_singularity() {
        // f ~ d^-1/2: integrable at the endpoint
        let v = endpoint_integral(ok(|t: f64| (1.0 - t).powf(-0.5)), 0.0, 1.0, &policy()).unwrap();
        assert_eq!(v.verdict, TailVerdict::Convergent);
        assert!((v.finite_value.unwrap() - 2.0).abs() < 1e-2);
    }

    #[test]
    fn detect_zero_examples() {
        let mu = MuProfile::from_expression(
            Expression::parse("1 + s^2", &["s"]).unwrap(),
            (f64::NEG_INFINITY, f64::INFINITY),
            vec![],
        )
        .unwrap();
        let scan = detect_zeros(&mu, (-10.0, 10.0), 4096).unwrap();
        assert!(scan.zeros.is_empty());

        let mu = MuProfile::from_expression(
            Expression::parse("sin(s)", &["s"]).unwrap(),
            (f64::NEG_INFINITY, f64::INFINITY),
            vec![],
        )
        .unwrap();
        let scan = detect_zeros(&mu, (0.1, std::f64::consts::PI + 0.1), 4096).unwrap();
        assert_eq!(scan.zeros.len(), 1);
        assert!((scan.zeros[0] - std::f64::consts::PI).abs() < 1e-8);

        let mu = MuProfile::from_expression(
            Expression::parse("s*(2 - s)", &["s"]).unwrap(),
            (f64::NEG_INFINITY, f64::INFINITY),
            vec![],
        )
        .unwrap();
        let scan = detect_zeros(&mu, (-1.0, 3.0), 4096).unwrap();
        assert_eq!(scan.zeros.len(), 2);
        assert!((scan.zeros[0] - 0.0).abs() < 1e-8);
        assert!((scan.zeros[1] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn bounded_evidence_accepts_oscillation() {
        let f = ok(|s: f64| 2.0 + s.sin());
        let sup = windowed_bound_evidence(&f, 0.0, Direction::Plus, ScanKind::SupBounded, &policy())
            .unwrap();
        let sup = sup.expect("bounded");
        assert!((sup - 3.0).abs() < 0.05, "sup = {sup}");
        // growing profile must be rejected
        let g = ok(|s: f64| 1.0 + s.abs().powf(0.3));
        let none =
            windowed_bound_evidence(&g, 0.0, Direction::Plus, ScanKind::SupBounded, &policy())
                .unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn inf_evidence_positive_floor() {
        let f = ok(|s: f64| 1.5 + (2.0 * s).cos());
        let inf = windowed_bound_evidence(&f, 0.0, Direction::Plus, ScanKind::InfPositive, &policy())
            .unwrap();
        let inf = inf.expect("positive floor");
        assert!(inf > 0.4 && inf < 0.6, "inf = {inf}");
        let g = ok(|s: f64| (-s).exp());
        let none =
            windowed_bound_evidence(&g, 0.0, Direction::Plus, ScanKind::InfPositive, &policy())
                .unwrap();
        assert!(none.is_none());
    }
}
