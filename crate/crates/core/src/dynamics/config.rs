use serde::{Deserialize, Serialize};

use super::spec::{MarketPriceOfRisk, VolatilitySpec};
use crate::curve::FlatFamilyParams;
use crate::error::{Error, Result};
use crate::grid::MaturityGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Scheme {
    /// Euler on `ln ρ` with the Itô correction; positivity is automatic.
    #[default]
    #[serde(rename = "log-euler")]
    LogEuler,
    /// Euler on `ρ`; non-positive values are clamped and counted.
    #[serde(rename = "euler-clamped")]
    EulerClamped,
}

/// Which algebraic form of the drift is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftForm {
    /// `∂ₓρ + ρ(0)ρ`
    #[default]
    Nonlinear,
    /// `ρ(∂ₓ ln ρ − E_ρ[∂ₓ ln ρ])` with `E_ρ[∂ₓ ln ρ] = −ρ(0)`
    Centered,
}

/// Initial term structure of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum InitialCurve {
    Flat(FlatFamilyParams),
    /// A `maturity_years,discount_factor` file, resolved by the caller.
    Csv {
        path: String,
    },
}

impl Default for InitialCurve {
    fn default() -> Self {
        InitialCurve::Flat(FlatFamilyParams {
            rate: 0.05,
            kappa: f64::INFINITY,
        })
    }
}

fn default_true() -> bool {
    true
}

fn default_d() -> usize {
    2
}

fn default_vol_cap() -> f64 {
    5.0
}

fn default_mpr_cap() -> f64 {
    5.0
}

fn default_blowup_cap() -> f64 {
    1e6
}

fn default_clamp_budget() -> usize {
    64
}

fn default_mpr() -> MarketPriceOfRisk {
    MarketPriceOfRisk::Zero
}

/// Simulation settings, readable from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub grid: MaturityGrid,
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_true")]
    pub renormalize: bool,
    pub vol_spec: VolatilitySpec,
    #[serde(default = "default_mpr")]
    pub mpr: MarketPriceOfRisk,
    /// Steps at which each path's state is kept (0 = initial state).
    #[serde(default)]
    pub snapshots: Vec<usize>,
    #[serde(default)]
    pub initial_curve: InitialCurve,
    #[serde(default)]
    pub drift_form: DriftForm,
    #[serde(default = "default_vol_cap")]
    pub vol_cap: f64,
    #[serde(default = "default_mpr_cap")]
    pub mpr_cap: f64,
    /// Largest density value tolerated before reporting blow-up.
    #[serde(default = "default_blowup_cap")]
    pub blowup_cap: f64,
    /// Clamp events allowed per path under `euler-clamped`.
    #[serde(default = "default_clamp_budget")]
    pub clamp_budget: usize,
    /// Calendar maturities whose deflated bond prices `P(t,T)/N(t)` are
    /// recorded at every snapshot.
    #[serde(default)]
    pub track_maturities: Vec<f64>,
    /// Keep the full density at snapshots (turn off for large ensembles).
    #[serde(default = "default_true")]
    pub keep_snapshot_densities: bool,
    /// Keep every state and Brownian increment of every path.
    #[serde(default)]
    pub keep_trajectories: bool,
}

impl SimConfig {
    /// A config with defaults for everything but the essentials.
    pub fn new(
        grid: MaturityGrid,
        dt: f64,
        n_steps: usize,
        n_paths: usize,
        seed: u64,
        vol_spec: VolatilitySpec,
    ) -> Self {
        Self {
            grid,
            dt,
            n_steps,
            n_paths,
            seed,
            d: vol_spec.factors(),
            scheme: Scheme::default(),
            renormalize: true,
            vol_spec,
            mpr: MarketPriceOfRisk::Zero,
            snapshots: Vec::new(),
            initial_curve: InitialCurve::default(),
            drift_form: DriftForm::default(),
            vol_cap: default_vol_cap(),
            mpr_cap: default_mpr_cap(),
            blowup_cap: default_blowup_cap(),
            clamp_budget: default_clamp_budget(),
            track_maturities: Vec::new(),
            keep_snapshot_densities: true,
            keep_trajectories: false,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: SimConfig =
            serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.n_steps == 0 || self.n_paths == 0 {
            return bad("n_steps and n_paths must be positive".into());
        }
        if self.n_steps as f64 * self.dt > 0.5 * self.grid.x_max() {
            return bad(format!(
                "horizon {} exceeds half the grid length {}",
                self.n_steps as f64 * self.dt,
                self.grid.x_max()
            ));
        }
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        self.vol_spec.validate()?;
        if self.vol_spec.factors() != self.d {
            return bad(format!(
                "vol_spec has {} factors but d = {}",
                self.vol_spec.factors(),
                self.d
            ));
        }
        self.mpr.validate(self.d)?;
        if let Some(&s) = self.snapshots.iter().find(|&&s| s > self.n_steps) {
            return bad(format!("snapshot {s} beyond n_steps"));
        }
        for (name, v) in [
            ("vol_cap", self.vol_cap),
            ("mpr_cap", self.mpr_cap),
            ("blowup_cap", self.blowup_cap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self
            .track_maturities
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0))
        {
            return bad("track_maturities must be non-negative".into());
        }
        if self.track_maturities.iter().any(|&t| t > self.grid.x_max()) {
            return bad("tracked maturity beyond the grid".into());
        }
        if let InitialCurve::Flat(p) = &self.initial_curve {
            p.validate()
                .map_err(|e| Error::InvalidConfig(format!("initial_curve: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_and_defaults() {
        let s = r#"{
            "grid": {"x_max": 100.0, "n_nodes": 1024},
            "dt": 0.01, "n_steps": 100, "n_paths": 4, "seed": 7, "d": 2,
            "scheme": "log-euler", "renormalize": true,
            "vol_spec": {"kind": "exponential", "params": {"amplitudes": [0.2, 0.1], "decays": [0.1, 0.02]}},
            "mpr": {"kind": "constant", "params": {"values": [0.1, -0.05]}},
            "snapshots": [0, 50, 100]
        }"#;
        let c = SimConfig::from_json(s).unwrap();
        assert_eq!(c.grid.len(), 1024);
        assert_eq!(c.initial_curve, InitialCurve::default());
        assert_eq!(SimConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = SimConfig::new(
            MaturityGrid::uniform(100.0, 256).unwrap(),
            0.01,
            100,
            1,
            1,
            VolatilitySpec::Zero { factors: 2 },
        );
        assert!(base.validate().is_ok());
        let mut c = base.clone();
        c.n_steps = 6000;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.d = 3;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.dt = -1.0;
        assert!(c.validate().is_err());
        assert!(SimConfig::from_json(r#"{"dt": 0.1}"#).is_err());
    }
}
