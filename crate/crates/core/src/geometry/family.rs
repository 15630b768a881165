use serde::{Deserialize, Serialize};

use crate::curve::FlatFamilyParams;

/// Largest parameter dimension supported by the metric and geodesic code.
pub const MAX_DIM: usize = 4;

/// Where a family's densities live.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    HalfLine,
    RealLine,
}

/// A smooth family of densities `ρ(x, θ)` with `θ ∈ ℝʳ`.
pub trait ParametricFamily: Sync {
    fn dim(&self) -> usize;

    fn density(&self, theta: &[f64], x: f64) -> f64;

    /// `∂ᵢ ln ρ(x, θ)` for i = 0..dim, written into `out`.
    fn grad_log_density(&self, theta: &[f64], x: f64, out: &mut [f64]);

    fn in_domain(&self, theta: &[f64]) -> bool;

    fn support(&self) -> Support;

    /// Location and length scale of the bulk of `ρ(·, θ)`, used to place
    /// quadrature nodes.
    fn frame(&self, theta: &[f64]) -> (f64, f64);

    fn describe(&self) -> String;
}

/// Normal densities in coordinates `θ = (μ, σ)`, σ > 0.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalFamily;

impl ParametricFamily for NormalFamily {
    fn dim(&self) -> usize {
        2
    }

    fn density(&self, theta: &[f64], x: f64) -> f64 {
        let (mu, sigma) = (theta[0], theta[1]);
        let z = (x - mu) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn grad_log_density(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        let (mu, sigma) = (theta[0], theta[1]);
        let z = (x - mu) / sigma;
        out[0] = z / sigma;
        out[1] = (z * z - 1.0) / sigma;
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == 2 && theta[0].is_finite() && theta[1].is_finite() && theta[1] > 0.0
    }

    fn support(&self) -> Support {
        Support::RealLine
    }

    fn frame(&self, theta: &[f64]) -> (f64, f64) {
        (theta[0], theta[1])
    }

    fn describe(&self) -> String {
        "normal".into()
    }
}

/// Coordinate used for the flat-rate family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCoordinate {
    /// θ = R
    Rate,
    /// θ = ln R
    LogRate,
}

/// One-parameter flat-rate family `ρ(x, R) = R(1 + Rx/κ)^{−(κ+1)}` at fixed
/// compounding frequency κ (κ = ∞ gives `R e^{−Rx}`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatRateFamily {
    pub kappa: f64,
    pub coordinate: RateCoordinate,
}

impl FlatRateFamily {
    pub fn new(kappa: f64, coordinate: RateCoordinate) -> Self {
        Self { kappa, coordinate }
    }

    pub fn rate(&self, theta: &[f64]) -> f64 {
        match self.coordinate {
            RateCoordinate::Rate => theta[0],
            RateCoordinate::LogRate => theta[0].exp(),
        }
    }

    pub fn coordinate_of(&self, rate: f64) -> f64 {
        match self.coordinate {
            RateCoordinate::Rate => rate,
            RateCoordinate::LogRate => rate.ln(),
        }
    }
}

impl ParametricFamily for FlatRateFamily {
    fn dim(&self) -> usize {
        1
    }

    fn density(&self, theta: &[f64], x: f64) -> f64 {
        FlatFamilyParams {
            rate: self.rate(theta),
            kappa: self.kappa,
        }
        .density(x)
    }

    fn grad_log_density(&self, theta: &[f64], x: f64, out: &mut [f64]) {
        let r = self.rate(theta);
        // ∂_R ln ρ
        let d = if self.kappa.is_infinite() {
            1.0 / r - x
        } else {
            1.0 / r - (self.kappa + 1.0) * x / (self.kappa + r * x)
        };
        out[0] = match self.coordinate {
            RateCoordinate::Rate => d,
            RateCoordinate::LogRate => r * d,
        };
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == 1
            && theta[0].is_finite()
            && match self.coordinate {
                RateCoordinate::Rate => theta[0] > 0.0,
                RateCoordinate::LogRate => true,
            }
    }

    fn support(&self) -> Support {
        Support::HalfLine
    }

    fn frame(&self, theta: &[f64]) -> (f64, f64) {
        (0.0, 1.0 / self.rate(theta))
    }

    fn describe(&self) -> String {
        let coord = match self.coordinate {
            RateCoordinate::Rate => "R",
            RateCoordinate::LogRate => "ln R",
        };
        format!("flat-kappa:{} ({coord})", self.kappa)
    }
}
