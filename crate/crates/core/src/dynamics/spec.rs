use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Inputs the exogenous processes may depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSummary {
    pub t: f64,
    pub short_rate: f64,
}

/// Unconstrained volatility field `ν(t, x)`, one component per Brownian
/// factor. Every component is clipped to `[−cap, cap]` when evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum VolatilitySpec {
    Zero {
        factors: usize,
    },
    /// Constant in x; centering removes it entirely.
    Constant {
        levels: Vec<f64>,
    },
    /// `a_k e^{−b_k x}`
    Exponential {
        amplitudes: Vec<f64>,
        decays: Vec<f64>,
    },
    /// `(a_k + b_k x) e^{−c_k x}`
    Humped {
        a: Vec<f64>,
        b: Vec<f64>,
        c: Vec<f64>,
    },
    /// `s_k x`
    Linear {
        slopes: Vec<f64>,
    },
    /// `a_k e^{−b_k x} (r / r_ref)^γ`
    LevelScaled {
        amplitudes: Vec<f64>,
        decays: Vec<f64>,
        reference_rate: f64,
        exponent: f64,
    },
}

impl VolatilitySpec {
    pub fn factors(&self) -> usize {
        match self {
            VolatilitySpec::Zero { factors } => *factors,
            VolatilitySpec::Constant { levels } => levels.len(),
            VolatilitySpec::Exponential { amplitudes, .. } => amplitudes.len(),
            VolatilitySpec::Humped { a, .. } => a.len(),
            VolatilitySpec::Linear { slopes } => slopes.len(),
            VolatilitySpec::LevelScaled { amplitudes, .. } => amplitudes.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("vol_spec: {m}")));
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            VolatilitySpec::Zero { factors } if *factors == 0 => {
                return bad("need at least one factor")
            }
            VolatilitySpec::Zero { .. } => {}
            VolatilitySpec::Constant { levels } if !finite(levels) => {
                return bad("non-finite level")
            }
            VolatilitySpec::Constant { .. } => {}
            VolatilitySpec::Exponential { amplitudes, decays } => {
                if amplitudes.len() != decays.len() {
                    return bad("amplitudes and decays differ in length");
                }
                if !finite(amplitudes) || decays.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                    return bad("decays must be finite and non-negative");
                }
            }
            VolatilitySpec::Humped { a, b, c } => {
                if a.len() != b.len() || a.len() != c.len() {
                    return bad("a, b, c differ in length");
                }
                if !finite(a) || !finite(b) || c.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return bad("c must be finite and non-negative");
                }
            }
            VolatilitySpec::Linear { slopes } if !finite(slopes) => return bad("non-finite slope"),
            VolatilitySpec::Linear { .. } => {}
            VolatilitySpec::LevelScaled {
                amplitudes,
                decays,
                reference_rate,
                exponent,
            } => {
                if amplitudes.len() != decays.len() {
                    return bad("amplitudes and decays differ in length");
                }
                if !(reference_rate.is_finite() && *reference_rate > 0.0 && exponent.is_finite()) {
                    return bad("reference_rate must be positive and exponent finite");
                }
                if !finite(amplitudes) || decays.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
                    return bad("decays must be finite and non-negative");
                }
            }
        }
        if self.factors() == 0 {
            return bad("need at least one factor");
        }
        Ok(())
    }

    /// Whether `evaluate` reads the state summary.
    pub fn is_state_dependent(&self) -> bool {
        matches!(self, VolatilitySpec::LevelScaled { exponent, .. } if *exponent != 0.0)
    }

    /// `ν_k(x_i)` for every factor k and node i, clipped to `[−cap, cap]`.
    pub fn evaluate(&self, nodes: &[f64], s: &StateSummary, cap: f64) -> Vec<Vec<f64>> {
        let clip = |v: f64| v.clamp(-cap, cap);
        let field = |f: &dyn Fn(f64) -> f64| nodes.iter().map(|&x| clip(f(x))).collect::<Vec<_>>();
        match self {
            VolatilitySpec::Zero { factors } => vec![vec![0.0; nodes.len()]; *factors],
            VolatilitySpec::Constant { levels } => levels.iter().map(|&l| field(&|_| l)).collect(),
            VolatilitySpec::Exponential { amplitudes, decays } => amplitudes
                .iter()
                .zip(decays)
                .map(|(&a, &b)| field(&|x| a * (-b * x).exp()))
                .collect(),
            VolatilitySpec::Humped { a, b, c } => (0..a.len())
                .map(|k| field(&|x| (a[k] + b[k] * x) * (-c[k] * x).exp()))
                .collect(),
            VolatilitySpec::Linear { slopes } => {
                slopes.iter().map(|&m| field(&|x| m * x)).collect()
            }
            VolatilitySpec::LevelScaled {
                amplitudes,
                decays,
                reference_rate,
                exponent,
            } => {
                let level = (s.short_rate.max(0.0) / reference_rate).powf(*exponent);
                amplitudes
                    .iter()
                    .zip(decays)
                    .map(|(&a, &b)| field(&|x| a * level * (-b * x).exp()))
                    .collect()
            }
        }
    }
}

/// Market price of risk `λ(t)`, clipped componentwise to `[−cap, cap]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum MarketPriceOfRisk {
    Zero,
    Constant { values: Vec<f64> },
}

impl MarketPriceOfRisk {
    pub fn validate(&self, factors: usize) -> Result<()> {
        match self {
            MarketPriceOfRisk::Zero => Ok(()),
            MarketPriceOfRisk::Constant { values } => {
                if values.len() != factors {
                    return Err(Error::InvalidConfig(format!(
                        "mpr has {} components but d = {factors}",
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidConfig("mpr: non-finite value".into()));
                }
                Ok(())
            }
        }
    }

    pub fn evaluate(&self, factors: usize, _s: &StateSummary, cap: f64) -> Vec<f64> {
        match self {
            MarketPriceOfRisk::Zero => vec![0.0; factors],
            MarketPriceOfRisk::Constant { values } => {
                values.iter().map(|v| v.clamp(-cap, cap)).collect()
            }
        }
    }
}
