//! Information geometry of term-structure densities.
//!
//! Densities map to the unit sphere of L² by `ξ = √ρ`. The angle between two
//! embedded densities is the Bhattacharyya distance. On a parametric family
//! the sphere metric pulls back to the Fisher–Rao metric
//! `g_ij = ¼ ∫ ρ ∂ᵢ ln ρ ∂ⱼ ln ρ`, whose geodesics are computed numerically.

mod family;
mod geodesic;
mod metric;

pub use family::{
    FlatRateFamily, NormalFamily, ParametricFamily, RateCoordinate, Support, MAX_DIM,
};
pub use geodesic::{geodesic_bvp, GeodesicOptions, GeodesicPath};
pub use metric::{christoffel, fisher_rao_metric, Christoffel, FisherRao, MetricTensor};

use crate::curve::TermStructureDensity;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_half_line, DeOptions};

/// `ξ = √ρ` on a grid, with `√tail_mass` standing in for the part beyond it.
#[derive(Debug, Clone, PartialEq)]
pub struct SqrtEmbedding {
    pub values: Vec<f64>,
    pub tail: f64,
}

impl SqrtEmbedding {
    pub fn new(density: &TermStructureDensity) -> Self {
        Self {
            values: density.values().iter().map(|v| v.sqrt()).collect(),
            tail: density.tail_mass().sqrt(),
        }
    }
}

/// Squared Hellinger-type distance `∫(√ρ₁ − √ρ₂)²`.
fn hellinger_sq(rho1: &TermStructureDensity, rho2: &TermStructureDensity) -> Result<f64> {
    if let (Some(a), Some(b)) = (rho1.analytic(), rho2.analytic()) {
        if a == b {
            return Ok(0.0);
        }
        let scale = a.scale().max(b.scale());
        let f = |x: f64| {
            let d = a.density(x).sqrt() - b.density(x).sqrt();
            d * d
        };
        return integrate_half_line(
            f,
            0.0,
            scale,
            DeOptions {
                rel_tol: 1e-13,
                ..DeOptions::default()
            },
        );
    }
    let g = rho1.grid();
    let e1 = SqrtEmbedding::new(rho1);
    let e2 = SqrtEmbedding::new(rho2);
    let diff: Vec<f64> = e1
        .values
        .iter()
        .zip(&e2.values)
        .map(|(p, q)| (p - q) * (p - q))
        .collect();
    let tail = e1.tail - e2.tail;
    Ok(g.integrate(&diff) + tail * tail)
}

/// Angle `φ = arccos ∫√(ρ₁ρ₂)` between two densities, in `[0, π/2]`.
///
/// For normalized densities `∫√(ρ₁ρ₂) = 1 − ½‖ξ₁ − ξ₂‖²`, and the angle is
/// computed as `2·asin(½‖ξ₁ − ξ₂‖)`, which keeps full relative precision
/// for nearby densities. Two closed-form densities are integrated exactly
/// on `[0, ∞)`; otherwise the trapezoid rule on the shared grid is used and
/// the tails beyond the grid contribute `(√t₁ − √t₂)²`.
pub fn bhattacharyya_distance(
    rho1: &TermStructureDensity,
    rho2: &TermStructureDensity,
) -> Result<f64> {
    if !rho1.grid().same_as(rho2.grid()) {
        return Err(Error::GridMismatch);
    }
    let h2 = hellinger_sq(rho1, rho2)?;
    // affinity clamped to [0, 1] ⇔ half-chord clamped to [0, 1/√2]
    let half_chord = (0.5 * h2.max(0.0).sqrt()).min(std::f64::consts::FRAC_1_SQRT_2);
    Ok(2.0 * half_chord.asin())
}

/// Fisher–Rao distance between flat-rate curves with common compounding
/// frequency κ, `√(κ/(κ+2))·|ln(R₂/R₁)|`. This is the length under the
/// Fisher information `4g`; κ = ∞ gives `|ln(R₂/R₁)|`.
pub fn flat_family_fr_distance(r1: f64, r2: f64, kappa: f64) -> Result<f64> {
    if !(r1 > 0.0 && r2 > 0.0 && r1.is_finite() && r2.is_finite()) {
        return Err(Error::InvalidParams("flat rates must be positive".into()));
    }
    if kappa.is_nan() || kappa <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    let factor = if kappa.is_infinite() {
        1.0
    } else {
        (kappa / (kappa + 2.0)).sqrt()
    };
    Ok(factor * (r2 / r1).ln().abs())
}

/// Distance between `N(μ₁, σ₁)` and `N(μ₂, σ₂)`, `(1/√2)·ln((1+δ)/(1−δ))`
/// with `δ² = ((Δμ)² + 2(Δσ)²)/((Δμ)² + 2(σ₁+σ₂)²)`. This is the length
/// under `g`.
pub fn normal_fr_distance(mu1: f64, sigma1: f64, mu2: f64, sigma2: f64) -> Result<f64> {
    if !(sigma1 > 0.0 && sigma2 > 0.0) || ![mu1, mu2, sigma1, sigma2].iter().all(|v| v.is_finite())
    {
        return Err(Error::InvalidParams(
            "normal parameters need finite μ and σ > 0".into(),
        ));
    }
    let dm2 = (mu2 - mu1).powi(2);
    let num = dm2 + 2.0 * (sigma2 - sigma1).powi(2);
    let den = dm2 + 2.0 * (sigma2 + sigma1).powi(2);
    let delta = (num / den).sqrt();
    // ln((1+δ)/(1−δ)) = 2·atanh δ
    Ok(std::f64::consts::SQRT_2 * delta.atanh())
}

#[cfg(test)]
mod tests;
