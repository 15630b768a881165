//! Discount curves, term-structure densities and the bijection between them.
//!
//! For an admissible curve (`P(0) = 1`, positive, strictly decreasing,
//! `P(∞) = 0`) the function `ρ(T) = −∂P/∂T` is a probability density on
//! maturities, and `P(T) = 1 − ∫₀^T ρ`. Closed-form curves keep their closed
//! form through both directions of the map; gridded curves go through finite
//! differences one way and cumulative trapezoid sums the other.

mod analytic;
mod interp;
mod laplace;

pub use analytic::{AnalyticDensity, FlatFamilyParams, PolyExpDensity};
pub use interp::InterpolatedCurve;
pub use laplace::{curve_from_laplace, InverseLaplaceWeight};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MaturityGrid;

/// Tolerances for normalization and truncation checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// |∫ρ − 1| allowed for closed-form densities.
    pub closed_form_norm: f64,
    /// |∫ρ + tail − 1| allowed for gridded densities.
    pub grid_norm: f64,
    /// Largest discount factor tolerated at the end of the grid for curves
    /// without a closed-form tail.
    pub tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            closed_form_norm: 1e-8,
            grid_norm: 1e-4,
            tail: 1e-4,
        }
    }
}

/// Maturity ↦ discount factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case")]
pub enum DiscountCurve {
    ClosedForm(AnalyticDensity),
    InterpolatedGrid(InterpolatedCurve),
}

impl DiscountCurve {
    pub fn flat(rate: f64, kappa: f64) -> Result<Self> {
        Ok(DiscountCurve::ClosedForm(AnalyticDensity::Flat(
            FlatFamilyParams::new(rate, kappa)?,
        )))
    }

    pub fn discount(&self, t: f64) -> f64 {
        match self {
            DiscountCurve::ClosedForm(d) => d.survival(t),
            DiscountCurve::InterpolatedGrid(c) => c.discount(t),
        }
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self, DiscountCurve::ClosedForm(_))
    }

    /// Checks `P(0) = 1`, positivity and strict decrease at the grid nodes.
    pub fn check_admissible(&self, grid: &MaturityGrid) -> Result<()> {
        let mut prev = self.discount(0.0);
        if (prev - 1.0).abs() > 1e-12 {
            return Err(Error::NonAdmissibleCurve(format!("P(0) = {prev}")));
        }
        for &x in &grid.nodes()[1..] {
            let p = self.discount(x);
            if !(p > 0.0) {
                return Err(Error::NonAdmissibleCurve(format!(
                    "P({x}) = {p} is not positive"
                )));
            }
            if !(p < prev) {
                return Err(Error::NonAdmissibleCurve(format!(
                    "not strictly decreasing at {x}"
                )));
            }
            prev = p;
        }
        Ok(())
    }
}

/// A probability density on maturities, sampled on a grid and optionally
/// backed by a closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStructureDensity {
    grid: MaturityGrid,
    values: Vec<f64>,
    tail_mass: f64,
    analytic: Option<AnalyticDensity>,
}

impl TermStructureDensity {
    /// Samples a closed form on `grid`; the mass beyond the grid is known
    /// exactly.
    pub fn from_analytic(analytic: AnalyticDensity, grid: &MaturityGrid) -> Self {
        let values = grid.nodes().iter().map(|&x| analytic.density(x)).collect();
        let tail_mass = analytic.survival(grid.x_max());
        Self {
            grid: grid.clone(),
            values,
            tail_mass,
            analytic: Some(analytic),
        }
    }

    /// Wraps gridded values, checking `|∫ρ + tail − 1| ≤ tol`.
    pub fn from_samples(
        grid: &MaturityGrid,
        values: Vec<f64>,
        tail_mass: f64,
        tol: f64,
    ) -> Result<Self> {
        let d = Self::from_samples_unchecked(grid, values, tail_mass)?;
        let total = d.total_mass();
        if (total - 1.0).abs() > tol {
            return Err(Error::NotNormalized {
                total,
                tolerance: tol,
            });
        }
        Ok(d)
    }

    /// Wraps gridded values, checking only shape and sign.
    pub fn from_samples_unchecked(
        grid: &MaturityGrid,
        values: Vec<f64>,
        tail_mass: f64,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::NegativeDensity { index, value });
        }
        if !(tail_mass.is_finite() && tail_mass >= 0.0) {
            return Err(Error::InvalidParams(format!("tail mass {tail_mass}")));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
            tail_mass,
            analytic: None,
        })
    }

    pub fn grid(&self) -> &MaturityGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn analytic(&self) -> Option<&AnalyticDensity> {
        self.analytic.as_ref()
    }

    /// ∫ρ over the grid plus the mass beyond it.
    pub fn total_mass(&self) -> f64 {
        self.grid.integrate(&self.values) + self.tail_mass
    }

    /// Drops the closed form, leaving only the samples.
    pub fn into_sampled(mut self) -> Self {
        self.analytic = None;
        self
    }

    /// ρ(0), the short rate implied by the curve.
    pub fn short_rate(&self) -> f64 {
        self.values[0]
    }
}

/// `ρ(x_i) = −P′(x_i)` on `grid`.
///
/// Closed forms are differentiated analytically; interpolated curves by
/// second-order finite differences of `P` at the nodes.
pub fn density_from_curve(
    curve: &DiscountCurve,
    grid: &MaturityGrid,
    tol: &Tolerances,
) -> Result<TermStructureDensity> {
    curve.check_admissible(grid)?;
    match curve {
        DiscountCurve::ClosedForm(a) => Ok(TermStructureDensity::from_analytic(a.clone(), grid)),
        DiscountCurve::InterpolatedGrid(c) => {
            let p: Vec<f64> = grid.nodes().iter().map(|&x| c.discount(x)).collect();
            let tail = p[p.len() - 1];
            if tail > tol.tail {
                return Err(Error::TailTooFat {
                    tail,
                    tolerance: tol.tail,
                });
            }
            let values: Vec<f64> = grid
                .derivative_central(&p)
                .into_iter()
                .map(|d| -d)
                .collect();
            // strictly decreasing P must give a positive density wherever the
            // curve is not yet numerically zero
            if let Some(i) =
                (0..values.len()).find(|&i| values[i] < 0.0 || (values[i] == 0.0 && p[i] > 1e-12))
            {
                return Err(Error::NonAdmissibleCurve(format!(
                    "density {} at maturity {} is not positive",
                    values[i],
                    grid.nodes()[i]
                )));
            }
            TermStructureDensity::from_samples(grid, values, tail, tol.grid_norm)
        }
    }
}

/// `P(T) = 1 − ∫₀^T ρ`.
///
/// Closed forms map to closed forms. Gridded densities are summed from the
/// right (`P(x_i) = tail + ∫_{x_i}^{x_max} ρ`, rescaled so `P(0) = 1`) which
/// keeps every discount factor positive even when the left sum would round
/// to one.
pub fn curve_from_density(
    density: &TermStructureDensity,
    tol: &Tolerances,
) -> Result<DiscountCurve> {
    if let Some(a) = density.analytic() {
        return Ok(DiscountCurve::ClosedForm(a.clone()));
    }
    let total = density.total_mass();
    if (total - 1.0).abs() > tol.grid_norm {
        return Err(Error::NotNormalized {
            total,
            tolerance: tol.grid_norm,
        });
    }
    let grid = density.grid();
    let h = grid.step();
    let v = density.values();
    let n = v.len();
    let mut p = vec![0.0; n];
    let mut acc = density.tail_mass();
    p[n - 1] = acc;
    for i in (0..n - 1).rev() {
        acc += 0.5 * h * (v[i] + v[i + 1]);
        p[i] = acc;
    }
    let norm = p[0];
    for x in &mut p {
        *x /= norm;
    }
    p[0] = 1.0;
    Ok(DiscountCurve::InterpolatedGrid(InterpolatedCurve::new(
        grid.nodes(),
        &p,
    )?))
}

/// Density of a flat-rate family on `grid`.
pub fn flat_family_density(
    params: FlatFamilyParams,
    grid: &MaturityGrid,
) -> Result<TermStructureDensity> {
    params.validate()?;
    Ok(TermStructureDensity::from_analytic(
        AnalyticDensity::Flat(params),
        grid,
    ))
}

/// Pointwise `a·ρ₁ + (1 − a)·ρ₂`.
pub fn mix_densities(
    a: f64,
    rho1: &TermStructureDensity,
    rho2: &TermStructureDensity,
) -> Result<TermStructureDensity> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidParams(format!(
            "mixing weight {a} outside [0, 1]"
        )));
    }
    if !rho1.grid().same_as(rho2.grid()) {
        return Err(Error::GridMismatch);
    }
    let b = 1.0 - a;
    if a == 1.0 {
        return Ok(rho1.clone());
    }
    if a == 0.0 {
        return Ok(rho2.clone());
    }
    let analytic = match (rho1.analytic(), rho2.analytic()) {
        (Some(x), Some(y)) if x == y => Some(x.clone()),
        (Some(x), Some(y)) => Some(AnalyticDensity::Mixture(vec![
            (a, x.clone()),
            (b, y.clone()),
        ])),
        _ => None,
    };
    let values = rho1
        .values()
        .iter()
        .zip(rho2.values())
        .map(|(p, q)| a * p + b * q)
        .collect();
    Ok(TermStructureDensity {
        grid: rho1.grid().clone(),
        values,
        tail_mass: a * rho1.tail_mass() + b * rho2.tail_mass(),
        analytic,
    })
}
