//! Closed-form term-structure densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_half_line, DeOptions};

/// A flat term structure with annualised rate `rate` compounded `kappa`
/// times a year; `kappa = ∞` is continuous compounding.
///
/// Discount factor `(1 + R·T/κ)^(−κ)`, density `R·(1 + R·T/κ)^(−(κ+1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlatFamilyParams {
    pub rate: f64,
    /// Written as the string `"inf"` in JSON when infinite.
    #[serde(with = "extended_f64")]
    pub kappa: f64,
}

/// JSON has no infinity; accept and emit `"inf"` for it.
mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr<'a> {
        Num(f64),
        Str(&'a str),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str("inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Str(other) => Err(de::Error::custom(format!(
                "expected a number or \"inf\", got \"{other}\""
            ))),
        }
    }
}

impl FlatFamilyParams {
    pub fn new(rate: f64, kappa: f64) -> Result<Self> {
        let p = Self { rate, kappa };
        p.validate()?;
        Ok(p)
    }

    pub fn continuous(rate: f64) -> Result<Self> {
        Self::new(rate, f64::INFINITY)
    }

    /// Simple-yield flat curve, `1/(1 + R·T)`.
    pub fn simple(rate: f64) -> Result<Self> {
        Self::new(rate, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return Err(Error::InvalidParams(format!(
                "flat rate must be positive, got {}",
                self.rate
            )));
        }
        if self.kappa.is_nan() || self.kappa <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "compounding frequency must be positive, got {}",
                self.kappa
            )));
        }
        Ok(())
    }

    pub fn is_continuous(&self) -> bool {
        self.kappa.is_infinite()
    }

    pub fn discount(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        if self.is_continuous() {
            (-self.rate * t).exp()
        } else {
            (-self.kappa * (self.rate * t / self.kappa).ln_1p()).exp()
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if self.is_continuous() {
            self.rate * (-self.rate * x).exp()
        } else {
            self.rate * (-(self.kappa + 1.0) * (self.rate * x / self.kappa).ln_1p()).exp()
        }
    }

    /// ∂ρ/∂x.
    pub fn density_slope(&self, x: f64) -> f64 {
        if self.is_continuous() {
            -self.rate * self.density(x)
        } else {
            let u = 1.0 + self.rate * x / self.kappa;
            -self.rate * (self.kappa + 1.0) / self.kappa * self.density(x) / u
        }
    }
}

/// Density `exp(−Σ_k λ_k x^k) / Z` on (0, ∞), the form taken by
/// maximum-entropy solutions under polynomial moment constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyExpDensity {
    /// λ_1, …, λ_m (the coefficient of x^k is `coefficients[k-1]`).
    pub coefficients: Vec<f64>,
    pub log_norm: f64,
    /// Characteristic length used to place quadrature nodes.
    pub scale: f64,
}

impl PolyExpDensity {
    pub fn exponent(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coefficients.iter().rev() {
            acc = (acc + c) * x;
        }
        acc
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        (-self.exponent(x) - self.log_norm).exp()
    }

    pub fn survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let opts = DeOptions {
            rel_tol: 1e-13,
            ..DeOptions::default()
        };
        integrate_half_line(|x| self.density(x), t, self.scale, opts).unwrap_or(0.0)
    }
}

/// A density that can be evaluated anywhere on [0, ∞).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticDensity {
    Flat(FlatFamilyParams),
    PolyExp(PolyExpDensity),
    /// Convex combination; weights sum to one.
    Mixture(Vec<(f64, AnalyticDensity)>),
}

impl AnalyticDensity {
    pub fn density(&self, x: f64) -> f64 {
        match self {
            AnalyticDensity::Flat(p) => p.density(x),
            AnalyticDensity::PolyExp(p) => p.density(x),
            AnalyticDensity::Mixture(parts) => parts.iter().map(|(w, d)| w * d.density(x)).sum(),
        }
    }

    /// Discount factor `P(T) = ∫_T^∞ ρ`.
    pub fn survival(&self, t: f64) -> f64 {
        match self {
            AnalyticDensity::Flat(p) => p.discount(t),
            AnalyticDensity::PolyExp(p) => p.survival(t),
            AnalyticDensity::Mixture(parts) => parts.iter().map(|(w, d)| w * d.survival(t)).sum(),
        }
    }

    /// Exponent `a` of a power-law tail `ρ ~ x^{−(a+1)}`; infinite for tails
    /// that decay faster than any power. Moments of order `n < a` exist.
    pub fn tail_index(&self) -> f64 {
        match self {
            AnalyticDensity::Flat(p) => p.kappa,
            AnalyticDensity::PolyExp(_) => f64::INFINITY,
            AnalyticDensity::Mixture(parts) => parts
                .iter()
                .filter(|(w, _)| *w > 0.0)
                .map(|(_, d)| d.tail_index())
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Length scale of the bulk of the mass, for placing quadrature nodes.
    pub fn scale(&self) -> f64 {
        match self {
            AnalyticDensity::Flat(p) => 1.0 / p.rate,
            AnalyticDensity::PolyExp(p) => p.scale,
            AnalyticDensity::Mixture(parts) => {
                parts.iter().map(|(_, d)| d.scale()).fold(0.0, f64::max)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_family_values() {
        let cont = FlatFamilyParams::continuous(0.05).unwrap();
        assert_eq!(cont.density(0.0), 0.05);
        assert!((cont.discount(10.0) - (-0.5f64).exp()).abs() < 1e-15);
        let simple = FlatFamilyParams::simple(0.05).unwrap();
        assert!((simple.density(20.0) - 0.0125).abs() < 1e-15);
        assert!((simple.discount(20.0) - 0.5).abs() < 1e-15);
        let semi = FlatFamilyParams::new(0.05, 2.0).unwrap();
        assert!((semi.discount(10.0) - 1.25f64.powi(-2)).abs() < 1e-15);
    }

    #[test]
    fn infinite_kappa_in_json() {
        let p = FlatFamilyParams::continuous(0.05).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"rate":0.05,"kappa":"inf"}"#);
        assert_eq!(serde_json::from_str::<FlatFamilyParams>(&s).unwrap(), p);
        let q: FlatFamilyParams = serde_json::from_str(r#"{"rate":0.05,"kappa":2}"#).unwrap();
        assert_eq!(q.kappa, 2.0);
    }

    #[test]
    fn invalid_params() {
        assert!(FlatFamilyParams::new(0.0, 1.0).is_err());
        assert!(FlatFamilyParams::new(0.05, 0.0).is_err());
        assert!(FlatFamilyParams::new(-0.01, f64::INFINITY).is_err());
        assert!(FlatFamilyParams::new(0.05, f64::NAN).is_err());
    }

    #[test]
    fn density_slope_matches_finite_difference() {
        for kappa in [1.0, 3.5, f64::INFINITY] {
            let p = FlatFamilyParams::new(0.07, kappa).unwrap();
            let x = 4.0;
            let h = 1e-5;
            let fd = (p.density(x + h) - p.density(x - h)) / (2.0 * h);
            assert!((fd - p.density_slope(x)).abs() < 1e-9);
        }
    }

    #[test]
    fn mixture_survival_is_convex_combination() {
        let a = AnalyticDensity::Flat(FlatFamilyParams::continuous(0.04).unwrap());
        let b = AnalyticDensity::Flat(FlatFamilyParams::continuous(0.06).unwrap());
        let m = AnalyticDensity::Mixture(vec![(0.5, a), (0.5, b)]);
        let t = 7.0_f64;
        let want = 0.5 * (-0.04 * t).exp() + 0.5 * (-0.06 * t).exp();
        assert!((m.survival(t) - want).abs() < 1e-15);
    }

    #[test]
    fn poly_exp_survival_by_quadrature() {
        let d = PolyExpDensity {
            coefficients: vec![0.05],
            log_norm: -(0.05f64).ln(),
            scale: 20.0,
        };
        assert!((d.density(0.0) - 0.05).abs() < 1e-15);
        assert!((d.survival(10.0) - (-0.5f64).exp()).abs() < 1e-12);
    }
}
