//! Independent numerical cross-checks of the classification machinery:
//! the warped-metric Laplacian identity, the bounded harmonic witness,
//! annulus harmonic measure, a stochastic first-exit oracle, and flatness
//! after the constant-norm conformal normalization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::classify::{tail_integral, Policy, TailVerdict};
use crate::error::Error;
use crate::expr::Expression;
use crate::geom::Direction;
use crate::numeric::{quad, MAX_PANELS};
use crate::profile::MuProfile;

/// Quadrature tolerances for the witness and measure integrals.
const Q_ABS: f64 = 1e-12;
const Q_REL: f64 = 1e-11;

fn inv_mu(mu: &MuProfile) -> impl Fn(f64) -> Result<f64, Error> + '_ {
    move |x| {
        let v = mu.value(x)?;
        if v <= 0.0 {
            return Err(Error::MuNonPositive { x, value: v });
        }
        Ok(1.0 / v)
    }
}

fn integral_inv_mu(mu: &MuProfile, a: f64, b: f64) -> Result<f64, Error> {
    Ok(quad::integrate(inv_mu(mu), a, b, Q_ABS, Q_REL, MAX_PANELS)?.value)
}

/// Difference between the finite-difference Laplace-Beltrami of the basic
/// function f on the warped metric dx^2 + mu(x)^2 dtheta^2 and the closed
/// form (1/mu)(mu f')'.
///
/// The coordinate Laplacian f'' + (mu'/mu) f' + mu^-2 f_thetatheta is
/// discretized with second-order central differences on the 2D five-point
/// stencil; the theta part of a basic function contributes exact zeros but
/// is evaluated like the rest.
pub fn laplacian_residual(
    mu: &MuProfile,
    f: &Expression,
    x: f64,
    h: f64,
) -> Result<f64, Error> {
    if f.vars().len() != 1 {
        return Err(Error::invalid("f must be a function of one variable"));
    }
    let mu_x = mu.value(x)?;
    if mu_x <= 0.0 {
        return Err(Error::MuNonPositive { x, value: mu_x });
    }
    let fv = |x: f64| -> Result<f64, Error> { Ok(f.eval(&[x])?) };
    // five-point stencil of the basic function F(x, theta) = f(x)
    let f_e = fv(x + h)?;
    let f_w = fv(x - h)?;
    let f_c = fv(x)?;
    let f_n = f_c; // theta + h
    let f_s = f_c; // theta - h

    let d2x = (f_e - 2.0 * f_c + f_w) / (h * h);
    let d1x = (f_e - f_w) / (2.0 * h);
    let d2theta = (f_n - 2.0 * f_c + f_s) / (h * h);
    let fd = d2x + mu.derivative(x)? / mu_x * d1x + d2theta / (mu_x * mu_x);

    let var = f.vars()[0].clone();
    let f1 = f.differentiate(&var)?;
    let f2 = f1.differentiate(&var)?;
    let closed = f2.eval(&[x])? + mu.derivative(x)? / mu_x * f1.eval(&[x])?;

    Ok(fd - closed)
}

/// The function F(s) = integral from s to s0 of dx/mu: harmonic on the
/// warped surface, bounded on a tail exactly when the tail integral of
/// 1/mu converges.
pub struct WitnessFunction {
    mu: MuProfile,
    s0: f64,
    tails: [(Direction, TailVerdict, Option<f64>); 2],
}

impl WitnessFunction {
    pub fn anchor(&self) -> f64 {
        self.s0
    }

    /// F(s); monotone decreasing, F(s0) = 0.
    pub fn value(&self, s: f64) -> Result<f64, Error> {
        Ok(-integral_inv_mu(&self.mu, self.s0, s)?)
    }

    /// Finite sup of |F| over the tail in `dir`, when that tail converges.
    pub fn bound(&self, dir: Direction) -> Option<f64> {
        self.tails
            .iter()
            .find(|(d, _, _)| *d == dir)
            .and_then(|(_, v, b)| (*v == TailVerdict::Convergent).then_some(*b).flatten())
    }

    pub fn tail_verdict(&self, dir: Direction) -> TailVerdict {
        self.tails
            .iter()
            .find(|(d, _, _)| *d == dir)
            .map(|(_, v, _)| *v)
            .expect("both directions present")
    }

    /// Residual of the finite-difference Laplacian of F at x. Stencil
    /// differences of F are computed as local quadratures so the division
    /// by h^2 does not amplify global quadrature error.
    pub fn harmonic_residual(&self, x: f64, h: f64) -> Result<f64, Error> {
        let mu_x = self.mu.value(x)?;
        if mu_x <= 0.0 {
            return Err(Error::MuNonPositive { x, value: mu_x });
        }
        let q_plus = integral_inv_mu(&self.mu, x, x + h)?; // F(x) - F(x+h)
        let q_minus = integral_inv_mu(&self.mu, x - h, x)?; // F(x-h) - F(x)
        let d2 = (q_minus - q_plus) / (h * h);
        let d1 = -(q_plus + q_minus) / (2.0 * h);
        Ok(d2 + self.mu.derivative(x)? / mu_x * d1)
    }
}

/// Build the witness anchored at s0, classifying both tails of 1/mu.
pub fn witness(mu: &MuProfile, s0: f64, policy: &Policy) -> Result<WitnessFunction, Error> {
    let f = inv_mu(mu);
    let (lo, hi) = mu.domain();
    let mut tails = Vec::with_capacity(2);
    for (dir, end) in [(Direction::Minus, lo), (Direction::Plus, hi)] {
        if end.is_finite() {
            // finite domain side: no infinite tail to classify
            tails.push((dir, TailVerdict::Convergent, None));
            continue;
        }
        let v = tail_integral(&f, s0, dir, policy)?;
        tails.push((dir, v.verdict, v.finite_value));
    }
    Ok(WitnessFunction {
        mu: mu.clone(),
        s0,
        tails: [tails[0], tails[1]],
    })
}

/// Harmonic measure of the outer boundary in the annulus [a, b]:
/// h(x0) = (S(x0) - S(a)) / (S(b) - S(a)) with S the primitive of 1/mu.
pub fn annulus_harmonic_measure(
    mu: &MuProfile,
    a: f64,
    b: f64,
    x0: f64,
) -> Result<f64, Error> {
    if !(a < x0 && x0 < b) {
        return Err(Error::invalid("need a < x0 < b"));
    }
    for i in 0..=256 {
        let x = a + (b - a) * i as f64 / 256.0;
        let v = mu.value(x)?;
        if v <= 0.0 {
            return Err(Error::MuNonPositive { x, value: v });
        }
    }
    let num = integral_inv_mu(mu, a, x0)?;
    let den = num + integral_inv_mu(mu, x0, b)?;
    Ok(num / den)
}

#[derive(Debug, Clone, Copy)]
pub struct WalkResult {
    pub hits_b: u64,
    pub n: u64,
    pub probability: f64,
    pub dt: f64,
    pub seed: u64,
}

/// Discrete monitoring misses intra-step boundary crossings; the standard
/// continuity correction pulls the absorbing thresholds inward by
/// 0.5826 sqrt(dt) to emulate continuous absorption at a and b.
const BARRIER_CORRECTION: f64 = 0.5826;

const WALK_BATCH: u64 = 1024;
const MAX_WALKER_STEPS: u64 = 50_000_000;

fn split_seed(master: u64, batch: u64) -> u64 {
    // splitmix64 on master + batch index
    let mut z = master.wrapping_add((batch + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Euler-Maruyama first-exit simulation of the radial diffusion
/// dX = mu'(X)/(2 mu(X)) dt + dW on [a, b] from x0. Returns the observed
/// frequency of absorption at b. Deterministic for a fixed seed: walker
/// batches draw from sub-seeds derived by fixed arithmetic and integer
/// counts are summed.
pub fn simulate_radial_diffusion(
    mu: &MuProfile,
    x0: f64,
    a: f64,
    b: f64,
    dt: Option<f64>,
    n: u64,
    seed: u64,
) -> Result<WalkResult, Error> {
    if !(a < x0 && x0 < b) {
        return Err(Error::invalid("need a < x0 < b"));
    }
    if n == 0 {
        return Err(Error::invalid("need at least one walker"));
    }
    let dt = dt.unwrap_or(1e-4 * (b - a) * (b - a));
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let limit = (b - a) / 10.0;
    let drift = mu.drift()?;

    // reject configurations whose drift step is too coarse for the annulus
    let mut stack = Vec::new();
    for i in 0..=128 {
        let x = a + (b - a) * i as f64 / 128.0;
        let d = drift.eval(x, &mut stack)?;
        let step = (d * dt).abs();
        if step > limit {
            return Err(Error::StepTooLarge { value: step, limit });
        }
    }

    let sq_dt = dt.sqrt();
    let a_eff = a + BARRIER_CORRECTION * sq_dt;
    let b_eff = b - BARRIER_CORRECTION * sq_dt;
    if !(a_eff < x0 && x0 < b_eff) {
        return Err(Error::invalid(
            "dt too large: corrected absorbing thresholds cross the start point",
        ));
    }

    let batches = n.div_ceil(WALK_BATCH);
    let normal = rand_distr::StandardNormal;
    let counts: Result<Vec<u64>, Error> = (0..batches)
        .into_par_iter()
        .map(|batch| {
            let walkers = WALK_BATCH.min(n - batch * WALK_BATCH);
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(seed, batch));
            let mut stack = Vec::new();
            let mut hits = 0u64;
            for _ in 0..walkers {
                let mut x = x0;
                let mut steps = 0u64;
                loop {
                    let d = drift.eval(x, &mut stack)?;
                    let step = d * dt;
                    if step.abs() > limit {
                        return Err(Error::StepTooLarge { value: step.abs(), limit });
                    }
                    let z: f64 = normal.sample(&mut rng);
                    x += step + sq_dt * z;
                    if !x.is_finite() {
                        return Err(Error::NonFiniteIntegrand { at: x });
                    }
                    if x <= a_eff {
                        break;
                    }
                    if x >= b_eff {
                        hits += 1;
                        break;
                    }
                    steps += 1;
                    if steps > MAX_WALKER_STEPS {
                        return Err(Error::invalid("walker exceeded the step budget"));
                    }
                }
            }
            Ok(hits)
        })
        .collect();
    let hits_b: u64 = counts?.iter().sum();
    Ok(WalkResult {
        hits_b,
        n,
        probability: hits_b as f64 / n as f64,
        dt,
        seed,
    })
}

/// Flatness after the constant-norm normalization: substitute
/// u(x) = integral dx/mu, rebuild the fiber-length profile in the u
/// coordinate, and measure its warped curvature -nu''/nu, which must
/// vanish. Returns max |K| over a probe grid.
///
/// nu is evaluated by composing mu with the numerically inverted change of
/// variable, so the check exercises the quadrature + inversion pipeline;
/// the finite-difference step is fixed at 1e-3 (a constant profile has no
/// truncation error and smaller steps only amplify rounding).
pub fn curvature_flatness_check(mu: &MuProfile, interval: (f64, f64)) -> Result<f64, Error> {
    let (lo, hi) = interval;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid("flatness check needs a finite interval"));
    }
    let n = 128usize;
    let mut xs = Vec::with_capacity(n + 1);
    let mut us = Vec::with_capacity(n + 1);
    let mut acc = 0.0f64;
    for i in 0..=n {
        let x = lo + (hi - lo) * i as f64 / n as f64;
        if i > 0 {
            acc += integral_inv_mu(mu, xs[i - 1], x)?;
        }
        xs.push(x);
        us.push(acc);
    }
    // invert u -> x by a bracketed Newton on the monotone change of variable
    let x_at = |u: f64| -> Result<f64, Error> {
        let idx = us.partition_point(|v| *v < u).clamp(1, n);
        let (mut x, u_base, x_base) = (
            0.5 * (xs[idx - 1] + xs[idx]),
            us[idx - 1],
            xs[idx - 1],
        );
        for _ in 0..60 {
            let s_val = u_base + integral_inv_mu(mu, x_base, x)?;
            let residual = s_val - u;
            if residual.abs() <= 1e-13 * u.abs().max(1.0) {
                break;
            }
            x -= residual * mu.value(x)?;
            x = x.clamp(lo, hi);
        }
        Ok(x)
    };

    // the normalized fiber length at u: mu * (1/mu), both composed with x(u)
    let nu = |u: f64| -> Result<f64, Error> {
        let x = x_at(u)?;
        let m = mu.value(x)?;
        if m <= 0.0 {
            return Err(Error::MuNonPositive { x, value: m });
        }
        Ok(m * (1.0 / m))
    };

    let u_lo = us[0];
    let u_hi = us[n];
    let mut max_k = 0.0f64;
    let probes = 33;
    for j in 0..probes {
        let frac = (j as f64 + 0.5) / probes as f64;
        let u = u_lo + (u_hi - u_lo) * frac;
        let h = 1e-3 * u.abs().max(1.0);
        if u - h <= u_lo || u + h >= u_hi {
            continue;
        }
        let center = nu(u)?;
        let second = (nu(u + h)? - 2.0 * center + nu(u - h)?) / (h * h);
        let k = (-second / center).abs();
        if k > max_k {
            max_k = k;
        }
    }
    Ok(max_k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expression;

    fn expr_mu(src: &str) -> MuProfile {
        MuProfile::from_expression(
            Expression::parse(src, &["x"]).unwrap(),
            (f64::NEG_INFINITY, f64::INFINITY),
            vec![],
        )
        .unwrap()
    }

    fn expr_mu_on(src: &str, domain: (f64, f64)) -> MuProfile {
        MuProfile::from_expression(Expression::parse(src, &["x"]).unwrap(), domain, vec![])
            .unwrap()
    }

    fn f(src: &str) -> Expression {
        Expression::parse(src, &["x"]).unwrap()
    }

    #[test]
    fn laplacian_flat_quadratic() {
        let mu = MuProfile::constant(1.0);
        // second-order scheme is exact on quadratics: residual at noise level
        let r = laplacian_residual(&mu, &f("x^2"), 0.7, 1e-3).unwrap();
        assert!(r.abs() < 1e-8, "residual {r}");
    }

    #[test]
    fn laplacian_harmonic_log() {
        let mu = expr_mu_on("x", (0.1, f64::INFINITY));
        let r = laplacian_residual(&mu, &f("log(x)"), 2.0, 1e-3).unwrap();
        assert!(r.abs() <= 1e-6, "residual {r}");
    }

    #[test]
    fn laplacian_harmonic_exp() {
        let mu = expr_mu("exp(x)");
        let r = laplacian_residual(&mu, &f("exp(-x)"), 0.0, 1e-3).unwrap();
        assert!(r.abs() <= 1e-6, "residual {r}");
    }

    #[test]
    fn laplacian_second_order_decay() {
        let mu = expr_mu_on("x", (0.1, f64::INFINITY));
        let r1 = laplacian_residual(&mu, &f("log(x)"), 2.0, 1e-3).unwrap().abs();
        let r2 = laplacian_residual(&mu, &f("log(x)"), 2.0, 5e-4).unwrap().abs();
        let ratio = r1 / r2;
        assert!((3.2..=4.8).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn witness_constant_mu() {
        let mu = MuProfile::constant(1.0);
        let w = witness(&mu, 2.0, &Policy::default()).unwrap();
        // F(s) = s0 - s
        assert!((w.value(5.0).unwrap() + 3.0).abs() < 1e-9);
        assert!(w.bound(Direction::Plus).is_none());
        assert!(w.bound(Direction::Minus).is_none());
    }

    #[test]
    fn witness_exponential_bound() {
        let mu = expr_mu("exp(x)");
        let w = witness(&mu, 0.0, &Policy::default()).unwrap();
        // + tail: F(s) = e^-s - 1, bounded by 1
        let b = w.bound(Direction::Plus).expect("bounded tail");
        assert!((b - 1.0).abs() < 1e-6, "bound {b}");
        assert_eq!(w.tail_verdict(Direction::Minus), TailVerdict::Divergent);
        // harmonicity
        for x in [-1.0, 0.0, 1.5] {
            let r = w.harmonic_residual(x, 1e-3).unwrap();
            assert!(r.abs() <= 1e-5, "residual {r} at {x}");
        }
    }

    #[test]
    fn witness_is_monotone_and_anchored() {
        let mu = expr_mu("1 + x^2");
        let w = witness(&mu, 0.5, &Policy::default()).unwrap();
        assert!(w.value(0.5).unwrap().abs() < 1e-12);
        let mut last = f64::INFINITY;
        for i in -8..=8 {
            let s = i as f64 * 0.7;
            let v = w.value(s).unwrap();
            assert!(v < last, "F must strictly decrease");
            last = v;
        }
    }

    #[test]
    fn witness_arctan_bound() {
        let mu = expr_mu("1 + x^2");
        let w = witness(&mu, 0.0, &Policy::default()).unwrap();
        let half_pi = std::f64::consts::FRAC_PI_2;
        for dir in [Direction::Plus, Direction::Minus] {
            let b = w.bound(dir).expect("bounded");
            assert!((b - half_pi).abs() < 1e-6, "bound {b}");
        }
        // quadrature value vs closed form at a finite point
        assert!((w.value(1.0).unwrap() + std::f64::consts::FRAC_PI_4).abs() < 1e-9);
    }

    #[test]
    fn annulus_examples() {
        let mu = MuProfile::constant(1.0);
        let h = annulus_harmonic_measure(&mu, 0.0, 1.0, 0.5).unwrap();
        assert!((h - 0.5).abs() < 1e-12);

        let mu = expr_mu_on("x", (0.1, f64::INFINITY));
        let h = annulus_harmonic_measure(&mu, 1.0, (2.0f64).exp().powi(1), std::f64::consts::E)
            .unwrap();
        // S = log: midpoint of [0, 2] in log scale... a = 1, b = e^2, x0 = e
        let h2 = annulus_harmonic_measure(&mu, 1.0, (std::f64::consts::E).powi(2), std::f64::consts::E)
            .unwrap();
        assert!((h2 - 0.5).abs() < 1e-10, "h = {h2}");
        let _ = h;

        let mu = expr_mu("exp(x)");
        let h = annulus_harmonic_measure(&mu, 0.0, 1.0, 0.5).unwrap();
        let exact = (1.0 - (-0.5f64).exp()) / (1.0 - (-1.0f64).exp());
        assert!((h - exact).abs() < 1e-10, "h = {h}, exact = {exact}");
    }

    #[test]
    fn diffusion_matches_measure_driftless() {
        let mu = MuProfile::constant(1.0);
        let r = simulate_radial_diffusion(&mu, 0.5, 0.0, 1.0, None, 20_000, 42).unwrap();
        let sigma = (0.5f64 * 0.5 / 20_000.0).sqrt();
        assert!(
            (r.probability - 0.5).abs() <= 3.5 * sigma,
            "p = {}, 3.5 sigma = {}",
            r.probability,
            3.5 * sigma
        );
    }

    #[test]
    fn diffusion_deterministic_per_seed() {
        let mu = expr_mu_on("x", (0.1, f64::INFINITY));
        let r1 =
            simulate_radial_diffusion(&mu, 2.0, 1.0, 4.0, None, 5_000, 7).unwrap();
        let r2 =
            simulate_radial_diffusion(&mu, 2.0, 1.0, 4.0, None, 5_000, 7).unwrap();
        assert_eq!(r1.hits_b, r2.hits_b);
        let r3 = simulate_radial_diffusion(&mu, 2.0, 1.0, 4.0, None, 5_000, 8).unwrap();
        assert_ne!(r1.hits_b, r3.hits_b, "different seeds should differ");
    }

    #[test]
    fn diffusion_rejects_coarse_steps() {
        // steep drift: mu = exp(20 x) has drift 10; dt huge
        let mu = expr_mu("exp(20*x)");
        let err = simulate_radial_diffusion(&mu, 0.5, 0.0, 1.0, Some(0.05), 10, 1);
        assert!(matches!(err, Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn flatness_examples() {
        let flat = MuProfile::constant(1.0);
        assert!(curvature_flatness_check(&flat, (-5.0, 5.0)).unwrap() <= 1e-8);
        let e = expr_mu("exp(x)");
        assert!(curvature_flatness_check(&e, (-5.0, 5.0)).unwrap() <= 1e-8);
        let q = expr_mu("1 + x^2");
        assert!(curvature_flatness_check(&q, (-5.0, 5.0)).unwrap() <= 1e-8);
    }

    #[test]
    fn escape_probability_trend() {
        // parabolic profiles: escape probability to b decays as b grows;
        // hyperbolic: stays bounded away from zero
        let policy = Policy::default();
        let cases: [(&str, (f64, f64), bool); 3] = [
            ("1", (f64::NEG_INFINITY, f64::INFINITY), false),
            ("x", (0.05, f64::INFINITY), false),
            ("exp(x)", (f64::NEG_INFINITY, f64::INFINITY), true),
        ];
        let _ = policy;
        for (src, domain, hyperbolic) in cases {
            let mu = expr_mu_on(src, domain);
            let a = if src == "x" { 1.0 } else { 0.0 };
            let x0 = a + 1.0;
            let mut probs = Vec::new();
            for b in [10.0, 100.0, 1000.0] {
                let h = annulus_harmonic_measure(&mu, a, b, x0).unwrap();
                probs.push(h);
            }
            if hyperbolic {
                assert!(probs.iter().all(|p| *p > 0.3), "{src}: {probs:?}");
            } else {
                assert!(probs[0] > probs[1] && probs[1] > probs[2], "{src}: {probs:?}");
                assert!(probs[2] < 0.15, "{src}: {probs:?}");
            }
        }
        // spot-check the diffusion against the measure on the largest gap
        let mu = expr_mu("exp(x)");
        let exact = annulus_harmonic_measure(&mu, 0.0, 10.0, 1.0).unwrap();
        let sim = simulate_radial_diffusion(&mu, 1.0, 0.0, 10.0, None, 20_000, 11).unwrap();
        let sigma = (exact * (1.0 - exact) / 20_000.0).sqrt();
        assert!(
            (sim.probability - exact).abs() <= 4.0 * sigma,
            "sim {} vs exact {exact}",
            sim.probability
        );
    }
}
