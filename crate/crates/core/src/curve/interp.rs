//! Shape-preserving cubic interpolation of `−ln P(T)`.
//!
//! Slopes follow Fritsch–Carlson (weighted harmonic means of adjacent
//! secants), which keeps the interpolant monotone whenever the data are.
//! Applied to `y = −ln P`, an increasing `y` means a positive, strictly
//! decreasing discount curve between knots, with a continuous forward rate.
//! Beyond the last knot `y` is extended linearly (flat forward).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatedCurve {
    knots: Vec<f64>,
    neg_log: Vec<f64>,
    slopes: Vec<f64>,
}

impl InterpolatedCurve {
    /// Builds the curve from `(maturity, discount factor)` pairs. The first
    /// pair must be `(0, 1)`; discount factors must be positive and strictly
    /// decreasing.
    pub fn new(maturities: &[f64], discounts: &[f64]) -> Result<Self> {
        if maturities.len() != discounts.len() {
            return Err(Error::Parse(
                "maturity and discount columns differ in length".into(),
            ));
        }
        if maturities.is_empty() || maturities[0] != 0.0 || discounts[0] != 1.0 {
            return Err(Error::MissingAnchor);
        }
        if maturities.len() < 2 {
            return Err(Error::Parse("need at least two curve points".into()));
        }
        for (i, pair) in maturities.windows(2).enumerate() {
            if !(pair[1] > pair[0]) || !pair[1].is_finite() {
                return Err(Error::Parse(format!(
                    "maturities must be finite and strictly increasing (row {})",
                    i + 2
                )));
            }
        }
        for (i, pair) in discounts.windows(2).enumerate() {
            if !(pair[1] < pair[0]) {
                return Err(Error::NonMonotoneInput {
                    maturity: maturities[i + 1],
                });
            }
            if !(pair[1] > 0.0) {
                return Err(Error::NonAdmissibleCurve(format!(
                    "discount factor {} at maturity {} is not positive",
                    pair[1],
                    maturities[i + 1]
                )));
            }
        }
        let neg_log: Vec<f64> = discounts.iter().map(|p| -p.ln()).collect();
        let slopes = pchip_slopes(maturities, &neg_log);
        Ok(Self {
            knots: maturities.to_vec(),
            neg_log,
            slopes,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn last_knot(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Knot discount factors.
    pub fn knot_discounts(&self) -> Vec<f64> {
        self.neg_log.iter().map(|y| (-y).exp()).collect()
    }

    fn segment(&self, t: f64) -> usize {
        let i = self.knots.partition_point(|&k| k <= t);
        i.saturating_sub(1).min(self.knots.len() - 2)
    }

    /// `−ln P(T)` and its derivative, the instantaneous forward rate.
    pub fn neg_log_and_forward(&self, t: f64) -> (f64, f64) {
        let n = self.knots.len();
        if t <= 0.0 {
            return (0.0, self.slopes[0]);
        }
        if t >= self.knots[n - 1] {
            let f = self.slopes[n - 1];
            return (self.neg_log[n - 1] + f * (t - self.knots[n - 1]), f);
        }
        let i = self.segment(t);
        let h = self.knots[i + 1] - self.knots[i];
        let s = (t - self.knots[i]) / h;
        let (y0, y1) = (self.neg_log[i], self.neg_log[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let y = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1;
        let dy = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * d0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * d1)
            / h;
        (y, dy)
    }

    pub fn discount(&self, t: f64) -> f64 {
        (-self.neg_log_and_forward(t).0).exp()
    }

    pub fn forward(&self, t: f64) -> f64 {
        self.neg_log_and_forward(t).1
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![delta[0], delta[0]];
    }
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

/// Three-point end slope, limited to stay within the monotone region. A
/// non-positive estimate is replaced by the end secant so the forward rate
/// stays strictly positive at the anchors.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d == 0.0 {
        d0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passes_through_knots_and_preserves_monotonicity() {
        let t = [0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0];
        let p: Vec<f64> = t
            .iter()
            .map(|&x: &f64| (-0.03 * x - 0.001 * x * x).exp())
            .collect();
        let c = InterpolatedCurve::new(&t, &p).unwrap();
        for (ti, pi) in t.iter().zip(&p) {
            assert!((c.discount(*ti) - pi).abs() < 1e-14);
        }
        let mut prev = 1.0;
        for k in 1..=4000 {
            let x = k as f64 * 0.01;
            let v = c.discount(x);
            assert!(v < prev && v > 0.0);
            assert!(c.forward(x) > 0.0);
            prev = v;
        }
    }

    #[test]
    fn exact_for_flat_continuous_curves() {
        let t: Vec<f64> = (0..=10).map(|i| i as f64 * 3.0).collect();
        let p: Vec<f64> = t.iter().map(|x| (-0.05 * x).exp()).collect();
        let c = InterpolatedCurve::new(&t, &p).unwrap();
        for x in [0.3, 7.7, 29.9, 45.0] {
            assert!((c.discount(x) - (-0.05 * x).exp()).abs() < 1e-14);
            assert!((c.forward(x) - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn input_errors() {
        assert!(matches!(
            InterpolatedCurve::new(&[0.0, 1.0, 2.0], &[1.0, 0.95, 0.97]),
            Err(Error::NonMonotoneInput { .. })
        ));
        assert!(matches!(
            InterpolatedCurve::new(&[0.5, 1.0], &[0.99, 0.95]),
            Err(Error::MissingAnchor)
        ));
        assert!(InterpolatedCurve::new(&[0.0, 1.0, 1.0], &[1.0, 0.9, 0.8]).is_err());
    }
}
