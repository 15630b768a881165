//! Arbitrage-free evolution of the term-structure density.
//!
//! In the Musiela parameterisation the density `ρ_t(x)` of time-to-maturity
//! obeys
//!
//! ```text
//! dρ = (∂ₓρ + ρ(0)ρ) dt + ρ σ·(dW + λ dt),    σ = ν − E_ρ[ν],
//! ```
//!
//! with the short rate `r_t = ρ_t(0)` and the numeraire
//! `dN/N = (r + |λ|²)dt + λ·dW`. Centering `ν` against `ρ` keeps `∫ρσ = 0`,
//! so the total mass is conserved by the noise. The step here discretizes
//! `∂ₓ` with the upwind stencil of [`MaturityGrid::derivative_upwind`]. The
//! mass beyond the last node carries no noise and follows the roll,
//! `d tail = (r·tail − ρ(x_max))dt`, which leaves it frozen whenever the far
//! tail is locally exponential at rate `r`.

mod config;
mod simulate;
mod spec;

pub use config::{DriftForm, InitialCurve, Scheme, SimConfig};
pub use simulate::{
    martingale_check, simulate, BrownianStream, Ensemble, MartingaleReport, MartingaleRow,
    PathResult, Snapshot,
};
pub use spec::{MarketPriceOfRisk, StateSummary, VolatilitySpec};

use serde::Serialize;

use crate::curve::TermStructureDensity;
use crate::error::{Error, Result};
use crate::grid::MaturityGrid;

/// One path's state at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPathState {
    pub t: f64,
    /// Density on the grid nodes.
    pub rho: Vec<f64>,
    /// Mass beyond the last node.
    pub tail_mass: f64,
    /// Short rate, always `rho[0]`.
    pub r: f64,
    pub numeraire: f64,
    pub log_numeraire: f64,
    /// Accumulated Brownian motion.
    pub w: Vec<f64>,
}

impl DensityPathState {
    /// Starts a path at `rho0`, rescaled so that the grid rule gives total
    /// mass exactly one.
    pub fn initial(rho0: &TermStructureDensity, factors: usize) -> Self {
        let c = (1.0 - rho0.tail_mass()) / rho0.grid().integrate(rho0.values());
        let rho: Vec<f64> = rho0.values().iter().map(|v| v * c).collect();
        Self {
            t: 0.0,
            r: rho[0],
            rho,
            tail_mass: rho0.tail_mass(),
            numeraire: 1.0,
            log_numeraire: 0.0,
            w: vec![0.0; factors],
        }
    }

    pub fn summary(&self) -> StateSummary {
        StateSummary {
            t: self.t,
            short_rate: self.r,
        }
    }

    /// `∫ρ` over the grid plus the frozen tail.
    pub fn total_mass(&self, grid: &MaturityGrid) -> f64 {
        grid.integrate(&self.rho) + self.tail_mass
    }

    pub fn to_density(&self, grid: &MaturityGrid) -> Result<TermStructureDensity> {
        TermStructureDensity::from_samples_unchecked(grid, self.rho.clone(), self.tail_mass)
    }
}

/// What one step observed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepDiagnostics {
    /// `|∫ρ + tail − 1|` after the raw step, before any renormalization.
    pub norm_err_pre: f64,
    /// Smallest density value after the step.
    pub min_rho: f64,
    /// `|∫ρσ_k|` for each factor at the start of the step.
    pub constraint_resid: Vec<f64>,
    pub clamp_events: usize,
    /// `|r − (−∂ₓ ln B|₀)|` after the step.
    pub short_rate_fd_gap: f64,
}

impl StepDiagnostics {
    /// Largest constraint residual over the factors.
    pub fn max_constraint_resid(&self) -> f64 {
        self.constraint_resid.iter().copied().fold(0.0, f64::max)
    }

    /// Worst case of two records.
    pub fn merge(&self, o: &StepDiagnostics) -> StepDiagnostics {
        StepDiagnostics {
            norm_err_pre: self.norm_err_pre.max(o.norm_err_pre),
            min_rho: self.min_rho.min(o.min_rho),
            constraint_resid: if self.constraint_resid.is_empty() {
                o.constraint_resid.clone()
            } else {
                self.constraint_resid
                    .iter()
                    .zip(&o.constraint_resid)
                    .map(|(a, b)| a.max(*b))
                    .collect()
            },
            clamp_events: self.clamp_events + o.clamp_events,
            short_rate_fd_gap: self.short_rate_fd_gap.max(o.short_rate_fd_gap),
        }
    }
}

/// Scheme settings shared by every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOptions {
    pub scheme: Scheme,
    pub drift_form: DriftForm,
    pub renormalize: bool,
    pub vol_cap: f64,
    pub mpr_cap: f64,
    pub blowup_cap: f64,
    /// Clamp events tolerated in one step before `PositivityLoss`.
    pub clamp_budget: usize,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::LogEuler,
            drift_form: DriftForm::Nonlinear,
            renormalize: true,
            vol_cap: 5.0,
            mpr_cap: 5.0,
            blowup_cap: 1e6,
            clamp_budget: 64,
        }
    }
}

impl StepOptions {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            scheme: cfg.scheme,
            drift_form: cfg.drift_form,
            renormalize: cfg.renormalize,
            vol_cap: cfg.vol_cap,
            mpr_cap: cfg.mpr_cap,
            blowup_cap: cfg.blowup_cap,
            clamp_budget: cfg.clamp_budget,
        }
    }
}

/// `σ_k = ν_k − E_ρ[ν_k]`, with the expectation taken by the grid rule and
/// normalized by the grid mass so that `∫ρσ_k` vanishes to round-off.
pub fn effective_sigma(grid: &MaturityGrid, nu: &[Vec<f64>], rho: &[f64]) -> Vec<Vec<f64>> {
    let mass = grid.integrate(rho);
    nu.iter()
        .map(|v| {
            let mean = grid.inner(rho, v) / mass;
            v.iter().map(|x| x - mean).collect()
        })
        .collect()
}

/// `∫ρσ_k` for every factor.
pub fn volatility_constraint_residual(
    grid: &MaturityGrid,
    rho: &[f64],
    sigma: &[Vec<f64>],
) -> Vec<f64> {
    sigma.iter().map(|s| grid.inner(rho, s)).collect()
}

/// `B_{t,x} = 1 − ∫₀^x ρ_t`.
pub fn bond_price_from_state(grid: &MaturityGrid, state: &DensityPathState, x: f64) -> Result<f64> {
    Ok(1.0 - grid.integrate_to(&state.rho, x)?)
}

/// Bond volatility `Σ_k(x) = −∫₀^x ρσ_k` at every node.
pub fn bond_volatility(grid: &MaturityGrid, rho: &[f64], sigma: &[Vec<f64>]) -> Vec<Vec<f64>> {
    sigma
        .iter()
        .map(|s| {
            let w: Vec<f64> = rho.iter().zip(s).map(|(p, q)| -p * q).collect();
            grid.cumulative(&w)
        })
        .collect()
}

/// `|r − (−∂ₓ ln B|₀)|` with `B` from the running trapezoid integral and a
/// second-order one-sided difference.
pub fn short_rate_fd_gap(grid: &MaturityGrid, rho: &[f64]) -> f64 {
    let h = grid.step();
    let b1 = 1.0 - 0.5 * h * (rho[0] + rho[1]);
    let b2 = b1 - 0.5 * h * (rho[1] + rho[2]);
    let slope = (4.0 * b1.ln() - b2.ln()) / (2.0 * h);
    (rho[0] + slope).abs()
}

/// The drift and diffusion inputs of a run bound to a grid.
pub struct Dynamics<'a> {
    grid: &'a MaturityGrid,
    vol: &'a VolatilitySpec,
    mpr: &'a MarketPriceOfRisk,
    pub opts: StepOptions,
    fixed_nu: Option<Vec<Vec<f64>>>,
}

impl<'a> Dynamics<'a> {
    pub fn new(
        grid: &'a MaturityGrid,
        vol: &'a VolatilitySpec,
        mpr: &'a MarketPriceOfRisk,
        opts: StepOptions,
    ) -> Result<Self> {
        vol.validate()?;
        mpr.validate(vol.factors())?;
        let fixed_nu = (!vol.is_state_dependent()).then(|| {
            let s = StateSummary {
                t: 0.0,
                short_rate: 0.0,
            };
            vol.evaluate(grid.nodes(), &s, opts.vol_cap)
        });
        Ok(Self {
            grid,
            vol,
            mpr,
            opts,
            fixed_nu,
        })
    }

    pub fn grid(&self) -> &MaturityGrid {
        self.grid
    }

    pub fn factors(&self) -> usize {
        self.vol.factors()
    }

    /// Raw `ν` at the current state.
    pub fn nu(&self, state: &DensityPathState) -> Vec<Vec<f64>> {
        match &self.fixed_nu {
            Some(nu) => nu.clone(),
            None => self
                .vol
                .evaluate(self.grid.nodes(), &state.summary(), self.opts.vol_cap),
        }
    }

    pub fn sigma(&self, state: &DensityPathState) -> Vec<Vec<f64>> {
        effective_sigma(self.grid, &self.nu(state), &state.rho)
    }

    pub fn lambda(&self, state: &DensityPathState) -> Vec<f64> {
        self.mpr
            .evaluate(self.factors(), &state.summary(), self.opts.mpr_cap)
    }

    /// Advances `state` by `dt` with Brownian increment `dw`.
    pub fn step(
        &self,
        state: &DensityPathState,
        dt: f64,
        dw: &[f64],
    ) -> Result<(DensityPathState, StepDiagnostics)> {
        let sigma = self.sigma(state);
        let lambda = self.lambda(state);
        self.step_with(state, &sigma, &lambda, dt, dw)
    }

    /// Advances `state` with a given centered `σ` and `λ`.
    pub fn step_with(
        &self,
        state: &DensityPathState,
        sigma: &[Vec<f64>],
        lambda: &[f64],
        dt: f64,
        dw: &[f64],
    ) -> Result<(DensityPathState, StepDiagnostics)> {
        let d = self.factors();
        if dw.len() != d || sigma.len() != d || lambda.len() != d {
            return Err(Error::InvalidParams(format!("expected {d} factors")));
        }
        if !(dt.is_finite() && dt > 0.0) || dw.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("dt and dW must be finite".into()));
        }
        let grid = self.grid;
        let n = grid.len();
        let rho = &state.rho;
        let r = state.r;
        let deriv = grid.derivative_upwind(rho);
        let constraint_resid: Vec<f64> = volatility_constraint_residual(grid, rho, sigma)
            .into_iter()
            .map(f64::abs)
            .collect();

        let mut next = vec![0.0; n];
        let mut clamp_events = 0;
        for i in 0..n {
            let mut shock = 0.0;
            let mut tilt = 0.0;
            let mut var = 0.0;
            for k in 0..d {
                let s = sigma[k][i];
                shock += s * dw[k];
                tilt += s * lambda[k];
                var += s * s;
            }
            next[i] = match self.opts.scheme {
                Scheme::LogEuler => {
                    let transport = match self.opts.drift_form {
                        DriftForm::Nonlinear => deriv[i] / rho[i] + r,
                        DriftForm::Centered => deriv[i] / rho[i] - (-r),
                    };
                    rho[i] * ((transport + tilt - 0.5 * var) * dt + shock).exp()
                }
                Scheme::EulerClamped => {
                    let drift = match self.opts.drift_form {
                        DriftForm::Nonlinear => deriv[i] + r * rho[i],
                        DriftForm::Centered => rho[i] * (deriv[i] / rho[i] - (-r)),
                    };
                    let v = rho[i] + (drift + rho[i] * tilt) * dt + rho[i] * shock;
                    if v <= 0.0 {
                        clamp_events += 1;
                        f64::MIN_POSITIVE
                    } else {
                        v
                    }
                }
            };
        }
        if clamp_events > self.opts.clamp_budget {
            return Err(Error::PositivityLoss(format!(
                "{clamp_events} nodes clamped in one step, budget {}",
                self.opts.clamp_budget
            )));
        }
        let mut max = 0.0_f64;
        let mut min = f64::INFINITY;
        for &v in &next {
            if !v.is_finite() {
                return Err(Error::BlowUp("non-finite density value".into()));
            }
            max = max.max(v);
            min = min.min(v);
        }
        if max > self.opts.blowup_cap {
            return Err(Error::BlowUp(format!("density reached {max:e}")));
        }
        if min <= 0.0 {
            return Err(Error::PositivityLoss("density underflowed to zero".into()));
        }

        let tail_mass = (state.tail_mass + (r * state.tail_mass - rho[n - 1]) * dt).max(0.0);
        let grid_mass = grid.integrate(&next);
        let norm_err_pre = (grid_mass + tail_mass - 1.0).abs();
        if self.opts.renormalize {
            let c = (1.0 - tail_mass) / grid_mass;
            next.iter_mut().for_each(|v| *v *= c);
            min *= c;
        }

        let lam2: f64 = lambda.iter().map(|l| l * l).sum();
        let lam_dw: f64 = lambda.iter().zip(dw).map(|(l, w)| l * w).sum();
        let log_numeraire = state.log_numeraire + (r + 0.5 * lam2) * dt + lam_dw;
        let diag = StepDiagnostics {
            norm_err_pre,
            min_rho: min,
            constraint_resid,
            clamp_events,
            short_rate_fd_gap: short_rate_fd_gap(grid, &next),
        };
        let out = DensityPathState {
            t: state.t + dt,
            r: next[0],
            rho: next,
            tail_mass,
            numeraire: log_numeraire.exp(),
            log_numeraire,
            w: state.w.iter().zip(dw).map(|(a, b)| a + b).collect(),
        };
        Ok((out, diag))
    }
}

/// One step of the density dynamics; see [`Dynamics::step`].
pub fn step_density(
    grid: &MaturityGrid,
    state: &DensityPathState,
    vol: &VolatilitySpec,
    mpr: &MarketPriceOfRisk,
    dt: f64,
    dw: &[f64],
    opts: StepOptions,
) -> Result<(DensityPathState, StepDiagnostics)> {
    Dynamics::new(grid, vol, mpr, opts)?.step(state, dt, dw)
}

#[cfg(test)]
mod tests;
