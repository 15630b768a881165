//! Principal moments and entropy of a term-structure density, the
//! maximum-entropy curve for given moments, and pathwise checks of the
//! moment dynamics.
//!
//! Entropy is in nats with `ρ` per year, so only differences between
//! densities are meaningful.

mod maxent;
mod sde;

pub use maxent::{max_entropy_density, max_entropy_law, MomentConstraint};
pub use sde::{
    critical_levels, moment_path, moment_state, scaling_exponent, validate_mean_sde,
    validate_variance_sde, CriticalLevels, MomentPathRecord, MomentPathRow, MomentSdeReport,
    MomentState, SdeValidation,
};

use std::collections::BTreeMap;

use serde::Serialize;

use crate::curve::{AnalyticDensity, TermStructureDensity};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_half_line, DeOptions};

pub const MAX_ORDER: usize = 4;

/// Relative change of a gridded moment integral between `x_max/2` and
/// `x_max` above which the moment is reported as non-existent.
pub const EXISTENCE_TOLERANCE: f64 = 1e-3;

/// Moments of a density. Absent values are `None`, never zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    pub mean: Option<f64>,
    /// Raw moments `E[xⁿ]` keyed by order.
    pub raw: BTreeMap<usize, Option<f64>>,
    /// Central moments `E[(x − x̄)ⁿ]` keyed by order, from 2.
    pub central: BTreeMap<usize, Option<f64>>,
    pub entropy: f64,
    pub exists: BTreeMap<usize, bool>,
}

impl MomentReport {
    pub fn raw(&self, n: usize) -> Option<f64> {
        self.raw.get(&n).copied().flatten()
    }

    pub fn central(&self, n: usize) -> Option<f64> {
        self.central.get(&n).copied().flatten()
    }

    pub fn exists(&self, n: usize) -> bool {
        self.exists.get(&n).copied().unwrap_or(false)
    }

    pub fn variance(&self) -> Option<f64> {
        self.central(2)
    }
}

fn de_opts() -> DeOptions {
    DeOptions {
        rel_tol: 1e-13,
        ..DeOptions::default()
    }
}

/// `∫₀^∞ f` for a closed-form integrand placed at the density's scale.
fn closed_integral(a: &AnalyticDensity, f: impl Fn(f64) -> f64) -> Option<f64> {
    integrate_half_line(f, 0.0, a.scale(), de_opts())
        .ok()
        .filter(|v| v.is_finite())
}

/// Trapezoid integral of `f(x)ρ(x)` over the nodes up to index `last`.
fn grid_integral(rho: &TermStructureDensity, last: usize, f: impl Fn(f64) -> f64) -> f64 {
    let g = rho.grid();
    let h = g.step();
    let x = g.nodes();
    let v = rho.values();
    let inner: f64 = (1..last).map(|i| f(x[i]) * v[i]).sum();
    h * (inner + 0.5 * (f(x[0]) * v[0] + f(x[last]) * v[last]))
}

/// `a` in `ρ ~ x^{−(a+1)}` from the density at the middle and end of the
/// grid; infinite when the end value has underflowed.
fn grid_tail_index(rho: &TermStructureDensity) -> f64 {
    let v = rho.values();
    let (mid, end) = (v[(v.len() - 1) / 2], v[v.len() - 1]);
    if end <= 0.0 {
        return f64::INFINITY;
    }
    if mid <= 0.0 {
        return 0.0;
    }
    let x = rho.grid().nodes();
    let ratio = x[x.len() - 1] / x[(x.len() - 1) / 2];
    -(end / mid).ln() / ratio.ln() - 1.0
}

/// Moments up to `max_order` (at most 4) with existence flags.
///
/// Closed forms decide existence from their tail index and integrate with
/// double-exponential quadrature. Gridded densities integrate with the
/// trapezoid rule. Order `n` is flagged as existing when the integral over
/// `[0, x_max]` differs from that over `[0, x_max/2]` by at most
/// [`EXISTENCE_TOLERANCE`] relative, or when the local power-law exponent
/// of the tail, `a = −log₂(ρ(x_max)/ρ(x_max/2)) − 1`, exceeds `n`.
pub fn moments(rho: &TermStructureDensity, max_order: usize) -> Result<MomentReport> {
    if !(1..=MAX_ORDER).contains(&max_order) {
        return Err(Error::InvalidParams(format!(
            "moment order must be in 1..={MAX_ORDER}"
        )));
    }
    let mut raw = BTreeMap::new();
    let mut exists = BTreeMap::new();
    match rho.analytic() {
        Some(a) => {
            let index = a.tail_index();
            for n in 1..=max_order {
                let v = if (n as f64) < index {
                    closed_integral(a, |x| x.powi(n as i32) * a.density(x))
                } else {
                    None
                };
                raw.insert(n, v);
                exists.insert(n, v.is_some());
            }
        }
        None => {
            let last = rho.grid().len() - 1;
            let index = grid_tail_index(rho);
            for n in 1..=max_order {
                let f = |x: f64| x.powi(n as i32);
                let full = grid_integral(rho, last, f);
                let half = grid_integral(rho, last / 2, f);
                let converged = (full - half).abs() <= EXISTENCE_TOLERANCE * full.abs();
                let ok = full.is_finite() && (converged || (n as f64) < index);
                raw.insert(n, ok.then_some(full));
                exists.insert(n, ok);
            }
        }
    }
    // a moment implies all lower ones
    for n in 2..=max_order {
        if !exists[&(n - 1)] {
            exists.insert(n, false);
            raw.insert(n, None);
        }
    }
    let mean = raw[&1];
    let mut central = BTreeMap::new();
    for n in 2..=max_order {
        let v = match (mean, exists[&n]) {
            (Some(m), true) => match rho.analytic() {
                Some(a) => closed_integral(a, |x| (x - m).powi(n as i32) * a.density(x)),
                None => Some(grid_integral(rho, rho.grid().len() - 1, |x| {
                    (x - m).powi(n as i32)
                })),
            },
            _ => None,
        };
        central.insert(n, v);
    }
    Ok(MomentReport {
        mean,
        raw,
        central,
        entropy: entropy(rho)?,
        exists,
    })
}

/// `S = −∫ρ ln ρ`.
pub fn entropy(rho: &TermStructureDensity) -> Result<f64> {
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    match rho.analytic() {
        Some(a) => integrate_half_line(|x| h(a.density(x)), 0.0, a.scale(), de_opts()),
        None => {
            let v: Vec<f64> = rho.values().iter().map(|&p| h(p)).collect();
            Ok(rho.grid().integrate(&v))
        }
    }
}

/// `v − x̄²`: zero for a continuously compounded flat curve.
pub fn flatness_gap(rho: &TermStructureDensity) -> Result<f64> {
    let r = moments(rho, 2)?;
    let v = r.variance().ok_or(Error::MomentMissing(2))?;
    let m = r.mean.ok_or(Error::MomentMissing(1))?;
    Ok(v - m * m)
}
