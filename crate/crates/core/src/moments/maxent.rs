use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MAX_ORDER;
use crate::curve::{AnalyticDensity, FlatFamilyParams, PolyExpDensity, TermStructureDensity};
use crate::error::{Error, Result};
use crate::grid::MaturityGrid;
use crate::quadrature::{integrate_half_line, DeOptions};

/// A target for the raw moment `E[x^order]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstraint {
    pub order: usize,
    pub value: f64,
}

const MAX_ITER: usize = 100;
const GRAD_TOL: f64 = 1e-13;

/// Density `exp(−φ(y))` in scaled units with `φ(y) = Σ μ_j y^{o_j}`.
struct Dual<'a> {
    orders: &'a [usize],
    targets: &'a [f64],
}

impl Dual<'_> {
    fn phi(&self, mu: &[f64], y: f64) -> f64 {
        self.orders
            .iter()
            .zip(mu)
            .map(|(&o, m)| m * y.powi(o as i32))
            .sum()
    }

    /// φ → ∞ at infinity: the highest-order nonzero coefficient is positive.
    fn integrable(&self, mu: &[f64]) -> bool {
        let mut lead = (0, 0.0);
        for (&o, &m) in self.orders.iter().zip(mu) {
            if m != 0.0 && o >= lead.0 {
                lead = (o, m);
            }
        }
        lead.1 > 0.0 && mu.iter().all(|m| m.is_finite())
    }

    /// `∫ y^k e^{−φ}` for every `k ≤ 2·max order`.
    fn power_integrals(&self, mu: &[f64]) -> Option<Vec<f64>> {
        let top = 2 * self.orders.iter().max().copied().unwrap_or(1);
        let opts = DeOptions {
            rel_tol: 1e-14,
            ..DeOptions::default()
        };
        (0..=top)
            .map(|k| {
                integrate_half_line(
                    |y| y.powi(k as i32) * (-self.phi(mu, y)).exp(),
                    0.0,
                    1.0,
                    opts,
                )
                .ok()
                .filter(|v| v.is_finite() && *v > 0.0)
            })
            .collect()
    }

    fn objective(&self, mu: &[f64], z: f64) -> f64 {
        z.ln() + mu.iter().zip(self.targets).map(|(m, t)| m * t).sum::<f64>()
    }
}

/// Backtracking (Armijo) search along `dir` that stays integrable.
fn line_search(
    dual: &Dual,
    mu: &[f64],
    dir: &DVector<f64>,
    grad: &DVector<f64>,
    f0: f64,
    newton: bool,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let slope = grad.dot(dir);
    if slope >= 0.0 {
        return None;
    }
    // near the optimum the decrease of a Newton step falls below the
    // objective's rounding, so the full step is taken unchecked
    if newton && -slope < 1e-12 {
        let trial: Vec<f64> = mu.iter().zip(dir.iter()).map(|(m, d)| m + d).collect();
        if dual.integrable(&trial) {
            if let Some(ti) = dual.power_integrals(&trial) {
                return Some((trial, ti));
            }
        }
    }
    let mut alpha = 1.0;
    while alpha > 1e-12 {
        let trial: Vec<f64> = mu
            .iter()
            .zip(dir.iter())
            .map(|(m, d)| m + alpha * d)
            .collect();
        if dual.integrable(&trial) {
            if let Some(ti) = dual.power_integrals(&trial) {
                if dual.objective(&trial, ti[0]) <= f0 + 1e-4 * alpha * slope {
                    return Some((trial, ti));
                }
            }
        }
        alpha *= 0.5;
    }
    None
}

/// Parameters of the maximum-entropy density on `(0, ∞)` with the given raw
/// moments: `ρ(x) ∝ exp(−Σ λ_k x^k)` over the constrained orders.
///
/// A lone mean gives the exponential `R e^{−Rx}` with `R = 1/x̄`.
pub fn max_entropy_law(constraints: &[MomentConstraint]) -> Result<AnalyticDensity> {
    let mut cs = constraints.to_vec();
    cs.sort_by_key(|c| c.order);
    if cs.is_empty() {
        return Err(Error::InvalidParams("no moment constraints".into()));
    }
    for w in cs.windows(2) {
        if w[0].order == w[1].order {
            return Err(Error::InvalidParams(format!(
                "order {} constrained twice",
                w[0].order
            )));
        }
    }
    for c in &cs {
        if !(1..=MAX_ORDER).contains(&c.order) {
            return Err(Error::InvalidParams(format!(
                "moment order must be in 1..={MAX_ORDER}"
            )));
        }
        if !(c.value.is_finite() && c.value > 0.0) {
            return Err(Error::Infeasible(format!(
                "moment {} must be positive",
                c.order
            )));
        }
    }
    let get = |n: usize| cs.iter().find(|c| c.order == n).map(|c| c.value);
    if let (Some(m1), Some(m2)) = (get(1), get(2)) {
        if m2 <= m1 * m1 {
            return Err(Error::Infeasible(format!(
                "second raw moment {m2} does not exceed the squared mean {}",
                m1 * m1
            )));
        }
    }

    // units in which the first guess exp(−yⁿ) matches the lowest
    // constrained order n exactly (its n-th moment is 1/n)
    let low = cs[0].order;
    let scale = (low as f64 * cs[0].value).powf(1.0 / low as f64);
    let orders: Vec<usize> = cs.iter().map(|c| c.order).collect();
    let targets: Vec<f64> = cs
        .iter()
        .map(|c| c.value / scale.powi(c.order as i32))
        .collect();
    let dual = Dual {
        orders: &orders,
        targets: &targets,
    };
    let m = orders.len();
    let mut mu = vec![0.0; m];
    mu[0] = 1.0;

    let mut ints = dual
        .power_integrals(&mu)
        .ok_or_else(|| Error::Infeasible("initial guess not integrable".into()))?;
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let z = ints[0];
        let e = |k: usize| ints[k] / z;
        let grad = DVector::from_iterator(m, (0..m).map(|j| targets[j] - e(orders[j])));
        if grad.amax() < GRAD_TOL * targets.iter().fold(1.0_f64, |a, t| a.max(t.abs())) {
            converged = true;
            break;
        }
        let hess = DMatrix::from_fn(m, m, |i, j| {
            e(orders[i] + orders[j]) - e(orders[i]) * e(orders[j])
        });
        let newton = match hess.cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => {
                return Err(Error::Infeasible(
                    "moment covariance became singular".into(),
                ))
            }
        };
        // Newton can point out of the integrable cone when a leading
        // coefficient sits at zero; steepest descent then takes over
        let f0 = dual.objective(&mu, z);
        let accepted = [(newton, true), (-grad.clone(), false)]
            .into_iter()
            .find_map(|(dir, is_newton)| line_search(&dual, &mu, &dir, &grad, f0, is_newton));
        match accepted {
            Some((t, ti)) => {
                mu = t;
                ints = ti;
            }
            None => break,
        }
    }
    if !converged {
        return Err(Error::Infeasible(
            "no maximum-entropy density of exponential-polynomial form matches these moments"
                .into(),
        ));
    }
    // higher coefficients at zero leave the exponential, e.g. variance = mean²
    if orders[0] == 1 && mu[1..].iter().all(|v| v.abs() <= 1e-12) {
        return Ok(AnalyticDensity::Flat(FlatFamilyParams::continuous(
            mu[0] / scale,
        )?));
    }
    let top = *orders.last().expect("nonempty");
    let mut coefficients = vec![0.0; top];
    for (&o, &v) in orders.iter().zip(&mu) {
        coefficients[o - 1] = v / scale.powi(o as i32);
    }
    Ok(AnalyticDensity::PolyExp(PolyExpDensity {
        coefficients,
        log_norm: ints[0].ln() + scale.ln(),
        scale,
    }))
}

/// [`max_entropy_law`] sampled on `grid`.
pub fn max_entropy_density(
    constraints: &[MomentConstraint],
    grid: &MaturityGrid,
) -> Result<TermStructureDensity> {
    Ok(TermStructureDensity::from_analytic(
        max_entropy_law(constraints)?,
        grid,
    ))
}
