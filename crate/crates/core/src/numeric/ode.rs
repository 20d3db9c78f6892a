//! Dormand-Prince 5(4) step with the classic quartic dense-output
//! interpolant, specialized to a scalar autonomous right-hand side.
//!
//! The driver loop (acceptance, events, storage) lives with the caller;
//! this module only knows how to take one embedded step and evaluate the
//! continuous extension.

use crate::error::Error;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_max: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions { rel_tol: 1e-9, abs_tol: 1e-12, h_max: f64::INFINITY }
    }
}

/// One accepted step with its dense-output coefficients.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep {
    /// Independent variable at the start of the step.
    pub x0: f64,
    pub h: f64,
    cont: [f64; 5],
}

impl DenseStep {
    /// Solution value at x0 + theta * h, theta in [0, 1].
    pub fn eval(&self, theta: f64) -> f64 {
        let [c0, c1, c2, c3, c4] = self.cont;
        let t = theta;
        let omt = 1.0 - t;
        c0 + t * (c1 + omt * (c2 + t * (c3 + omt * c4)))
    }

    /// d(solution)/dx at x0 + theta * h.
    pub fn eval_derivative(&self, theta: f64) -> f64 {
        let [_, c1, c2, c3, c4] = self.cont;
        let t = theta;
        let dp = c1 + c2 * (1.0 - 2.0 * t) + c3 * (2.0 * t - 3.0 * t * t)
            + c4 * (2.0 * t - 6.0 * t * t + 4.0 * t * t * t);
        dp / self.h
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + self.h
    }

    pub fn y_start(&self) -> f64 {
        self.cont[0]
    }

    pub fn y_end(&self) -> f64 {
        self.cont[0] + self.cont[1]
    }
}

pub struct StepOutcome {
    pub accepted: bool,
    pub y1: f64,
    /// RHS at y1 (FSAL) when accepted.
    pub f1: f64,
    pub dense: DenseStep,
    pub err_norm: f64,
    pub h_next: f64,
}

/// Attempt a single step of size `h` from (x, y) with k1 = f(y) given.
pub fn step<F>(
    f: &F,
    x: f64,
    y: f64,
    k1: f64,
    h: f64,
    opts: &OdeOptions,
) -> Result<StepOutcome, Error>
where
    F: Fn(f64) -> Result<f64, Error>,
{
    let k2 = f(y + h * (A21 * k1))?;
    let k3 = f(y + h * (A31 * k1 + A32 * k2))?;
    let k4 = f(y + h * (A41 * k1 + A42 * k2 + A43 * k3))?;
    let k5 = f(y + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))?;
    let k6 = f(y + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))?;
    let y1 = y + h * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
    let k7 = f(y1)?;

    let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
    let scale = opts.abs_tol + opts.rel_tol * y.abs().max(y1.abs());
    let err_norm = (err / scale).abs();

    let accepted = err_norm <= 1.0;
    let factor = if err_norm == 0.0 {
        5.0
    } else {
        (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
    };
    let h_next = (h * factor).min(opts.h_max);

    let ydiff = y1 - y;
    let bspl = h * k1 - ydiff;
    let cont = [
        y,
        ydiff,
        bspl,
        ydiff - h * k7 - bspl,
        h * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7),
    ];

    Ok(StepOutcome {
        accepted,
        y1,
        f1: k7,
        dense: DenseStep { x0: x, h, cont },
        err_norm,
        h_next,
    })
}

/// Conservative first step size from the initial slope.
pub fn initial_step(y0: f64, f0: f64, opts: &OdeOptions) -> f64 {
    let scale = opts.abs_tol + opts.rel_tol * y0.abs();
    let d0 = y0.abs().max(1e-4);
    let d1 = f0.abs();
    let h = if d1 <= 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    h.max(scale.sqrt()).min(opts.h_max).max(1e-12)
}
