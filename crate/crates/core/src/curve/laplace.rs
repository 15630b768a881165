//! Discount functions as Laplace transforms of a weight on short rates,
//! `P(T) = ∫₀^∞ e^{−rT} ψ(r) dr`.

use serde::{Deserialize, Serialize};

use super::{AnalyticDensity, DiscountCurve, FlatFamilyParams, InterpolatedCurve};
use crate::error::{Error, Result};
use crate::grid::MaturityGrid;

const WEIGHT_NORM_TOL: f64 = 1e-4;

/// Weight density ψ over rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InverseLaplaceWeight {
    /// All weight at rate `rate`: `P = e^{−RT}`.
    Dirac { rate: f64 },
    /// `ψ(r) = τ e^{−τr}`: `P = τ/(τ+T)`.
    Exponential { tau: f64 },
    /// `ψ(r) = λ^κ r^{κ−1} e^{−λr}/Γ(κ)`: `P = (λ/(λ+T))^κ`.
    Gamma { kappa: f64, lambda: f64 },
    /// ψ sampled at increasing rates, integrated by the trapezoid rule.
    CustomGrid { rates: Vec<f64>, weights: Vec<f64> },
}

impl InverseLaplaceWeight {
    /// The equivalent flat family, when there is one.
    pub fn flat_family(&self) -> Option<FlatFamilyParams> {
        match *self {
            InverseLaplaceWeight::Dirac { rate } => Some(FlatFamilyParams {
                rate,
                kappa: f64::INFINITY,
            }),
            InverseLaplaceWeight::Exponential { tau } => Some(FlatFamilyParams {
                rate: 1.0 / tau,
                kappa: 1.0,
            }),
            InverseLaplaceWeight::Gamma { kappa, lambda } => Some(FlatFamilyParams {
                rate: kappa / lambda,
                kappa,
            }),
            InverseLaplaceWeight::CustomGrid { .. } => None,
        }
    }
}

fn custom_segments(rates: &[f64], weights: &[f64]) -> Result<f64> {
    if rates.len() != weights.len() || rates.len() < 2 {
        return Err(Error::InvalidParams(
            "custom weight needs matching rate and weight columns".into(),
        ));
    }
    if rates[0] < 0.0 || rates.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams(
            "weight rates must be non-negative and increasing".into(),
        ));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParams("weights must be non-negative".into()));
    }
    Ok(rates
        .windows(2)
        .zip(weights.windows(2))
        .map(|(r, w)| 0.5 * (r[1] - r[0]) * (w[0] + w[1]))
        .sum())
}

/// Discount curve generated by `weight`.
///
/// The parametric weights give closed-form flat-family curves; a custom
/// weight is integrated at every grid node and interpolated between them.
pub fn curve_from_laplace(
    weight: &InverseLaplaceWeight,
    grid: &MaturityGrid,
) -> Result<DiscountCurve> {
    if let Some(params) = weight.flat_family() {
        let params = FlatFamilyParams::new(params.rate, params.kappa)?;
        return Ok(DiscountCurve::ClosedForm(AnalyticDensity::Flat(params)));
    }
    let InverseLaplaceWeight::CustomGrid { rates, weights } = weight else {
        unreachable!("parametric weights handled above");
    };
    let total = custom_segments(rates, weights)?;
    if (total - 1.0).abs() > WEIGHT_NORM_TOL {
        return Err(Error::NotNormalized {
            total,
            tolerance: WEIGHT_NORM_TOL,
        });
    }
    let discounts: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|&t| {
            let f: Vec<f64> = rates
                .iter()
                .zip(weights)
                .map(|(r, w)| (-r * t).exp() * w)
                .collect();
            custom_segments(rates, &f).expect("validated above") / total
        })
        .collect();
    Ok(DiscountCurve::InterpolatedGrid(InterpolatedCurve::new(
        grid.nodes(),
        &discounts,
    )?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate_half_line, DeOptions};

    #[test]
    fn parametric_weights_have_closed_forms() {
        let g = MaturityGrid::uniform(100.0, 101).unwrap();
        let dirac = curve_from_laplace(&InverseLaplaceWeight::Dirac { rate: 0.05 }, &g).unwrap();
        assert!((dirac.discount(10.0) - (-0.5f64).exp()).abs() < 1e-15);
        let expo =
            curve_from_laplace(&InverseLaplaceWeight::Exponential { tau: 20.0 }, &g).unwrap();
        assert!((expo.discount(10.0) - 2.0 / 3.0).abs() < 1e-15);
        let gamma = curve_from_laplace(
            &InverseLaplaceWeight::Gamma {
                kappa: 4.0,
                lambda: 80.0,
            },
            &g,
        )
        .unwrap();
        assert!((gamma.discount(20.0) - 0.4096).abs() < 1e-14);
    }

    #[test]
    fn gamma_closed_form_matches_laplace_quadrature() {
        // ψ(r) = λ^κ r^{κ−1} e^{−λr} / Γ(κ) with κ = 4, λ = 80
        let (kappa, lambda) = (4.0_f64, 80.0_f64);
        let psi = |r: f64| lambda.powf(kappa) * r.powf(kappa - 1.0) * (-lambda * r).exp() / 6.0;
        let t = 20.0;
        let p = integrate_half_line(|r| (-r * t).exp() * psi(r), 0.0, 0.05, DeOptions::default())
            .unwrap();
        assert!((p - 0.4096).abs() < 1e-12);
    }

    #[test]
    fn custom_grid_reproduces_exponential_weight() {
        let tau = 20.0;
        let rates: Vec<f64> = (0..=20000).map(|i| i as f64 * 1e-4).collect();
        let weights: Vec<f64> = rates.iter().map(|r| tau * (-tau * r).exp()).collect();
        let g = MaturityGrid::uniform(50.0, 51).unwrap();
        let c =
            curve_from_laplace(&InverseLaplaceWeight::CustomGrid { rates, weights }, &g).unwrap();
        assert!((c.discount(10.0) - 2.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn unnormalized_custom_weight_rejected() {
        let g = MaturityGrid::uniform(50.0, 51).unwrap();
        let w = InverseLaplaceWeight::CustomGrid {
            rates: vec![0.0, 0.1],
            weights: vec![1.0, 1.0],
        };
        assert!(matches!(
            curve_from_laplace(&w, &g),
            Err(Error::NotNormalized { .. })
        ));
    }
}
