//! Shape-preserving piecewise cubic interpolation (Fritsch-Carlson tangents
//! with the Fritsch-Butland weighted harmonic mean). Monotone data yield a
//! monotone interpolant; the result is C1.

use crate::error::Error;

#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(points: &[(f64, f64)]) -> Result<Pchip, Error> {
        if points.len() < 2 {
            return Err(Error::invalid("interpolation table needs at least 2 samples"));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
        for w in xs.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::invalid(format!(
                    "table abscissae must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::invalid("table entries must be finite"));
        }
        let n = xs.len();
        let h: Vec<f64> = (0..n - 1).map(|i| xs[i + 1] - xs[i]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();

        let mut d = vec![0.0f64; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = edge_tangent(h[0], h.get(1).copied(), delta[0], delta.get(1).copied());
        d[n - 1] = edge_tangent(
            h[n - 2],
            (n >= 3).then(|| h[n - 3]),
            delta[n - 2],
            (n >= 3).then(|| delta[n - 3]),
        );
        Ok(Pchip { xs, ys, d })
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    /// Value at x; clamps to the end cubics outside the table.
    pub fn value(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.d[i], self.d[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        y0 * (2.0 * t3 - 3.0 * t2 + 1.0)
            + h * d0 * (t3 - 2.0 * t2 + t)
            + y1 * (-2.0 * t3 + 3.0 * t2)
            + h * d1 * (t3 - t2)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (y0, y1, d0, d1) = (self.ys[i], self.ys[i + 1], self.d[i], self.d[i + 1]);
        let t2 = t * t;
        (y0 * (6.0 * t2 - 6.0 * t) / h)
            + d0 * (3.0 * t2 - 4.0 * t + 1.0)
            + (y1 * (-6.0 * t2 + 6.0 * t) / h)
            + d1 * (3.0 * t2 - 2.0 * t)
    }
}

/// Non-centered boundary tangent with the usual shape-preserving clips.
fn edge_tangent(h0: f64, h1: Option<f64>, d0: f64, d1: Option<f64>) -> f64 {
    let (h1, d1) = match (h1, d1) {
        (Some(h1), Some(d1)) => (h1, d1),
        _ => return d0,
    };
    let mut t = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if t * d0 <= 0.0 {
        t = 0.0;
    } else if d0 * d1 <= 0.0 && t.abs() > 3.0 * d0.abs() {
        t = 3.0 * d0;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_data() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (i as f64, 3.0 * i as f64 + 1.0)).collect();
        let p = Pchip::new(&pts).unwrap();
        for i in 0..70 {
            let x = i as f64 * 0.1;
            assert!((p.value(x) - (3.0 * x + 1.0)).abs() < 1e-12);
            assert!((p.derivative(x) - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn monotone_data_monotone_interpolant() {
        let pts = [(0.0, 0.0), (1.0, 0.1), (2.0, 0.11), (3.0, 5.0), (4.0, 5.01)];
        let p = Pchip::new(&pts).unwrap();
        let mut last = f64::NEG_INFINITY;
        for i in 0..=400 {
            let x = i as f64 * 0.01;
            let v = p.value(x);
            assert!(v >= last - 1e-12, "not monotone at {x}");
            last = v;
        }
    }

    #[test]
    fn rejects_unsorted() {
        assert!(Pchip::new(&[(0.0, 1.0), (0.0, 2.0)]).is_err());
    }
}
