use serde::Serialize;

use crate::dynamics::{bond_volatility, DensityPathState, Dynamics, Ensemble, StepOptions};
use crate::error::{Error, Result};
use crate::grid::MaturityGrid;

/// Moment quantities of one state, all by the grid rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentState {
    pub t: f64,
    pub r: f64,
    pub mean: f64,
    pub variance: f64,
    /// `Σ̄_k = ∫Σ_k dx`.
    pub sigma_bar: Vec<f64>,
    /// `Σ̄⁽¹⁾_k = ∫xΣ_k dx`.
    pub sigma_bar1: Vec<f64>,
}

/// Mean, variance and integrated bond volatilities of `state` under the
/// centered volatility `sigma`.
pub fn moment_state(
    grid: &MaturityGrid,
    state: &DensityPathState,
    sigma: &[Vec<f64>],
) -> MomentState {
    let x = grid.nodes();
    let xr: Vec<f64> = x.iter().zip(&state.rho).map(|(a, p)| a * p).collect();
    let mean = grid.integrate(&xr);
    let m2 = grid.inner(x, &xr);
    let bv = bond_volatility(grid, &state.rho, sigma);
    MomentState {
        t: state.t,
        r: state.r,
        mean,
        variance: m2 - mean * mean,
        sigma_bar: bv.iter().map(|s| grid.integrate(s)).collect(),
        sigma_bar1: bv.iter().map(|s| grid.inner(x, s)).collect(),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Levels at which the real-world drifts of the mean and of the flatness gap
/// vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalLevels {
    /// `x̄* = (1 − λ·Σ̄)/r`
    pub mean: f64,
    /// `(|Σ̄|² − 2λ·(Σ̄⁽¹⁾ − x̄Σ̄))/r`, the critical value of `v − x̄²`.
    pub variance_gap: f64,
}

pub fn critical_levels(m: &MomentState, lambda: &[f64]) -> Result<CriticalLevels> {
    if m.r <= 0.0 {
        return Err(Error::ZeroShortRate);
    }
    let s2 = dot(&m.sigma_bar, &m.sigma_bar);
    let shear: Vec<f64> = m
        .sigma_bar1
        .iter()
        .zip(&m.sigma_bar)
        .map(|(a, b)| a - m.mean * b)
        .collect();
    Ok(CriticalLevels {
        mean: (1.0 - dot(lambda, &m.sigma_bar)) / m.r,
        variance_gap: (s2 - 2.0 * dot(lambda, &shear)) / m.r,
    })
}

/// Settings of the pathwise moment checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdeValidation {
    /// Largest per-step residual counted as agreement.
    pub max_residual: f64,
    /// Multiplies `Σ̄` in the predicted increment; `−1` is a deliberate error
    /// that the check must detect.
    pub sigma_bar_sign: f64,
}

impl Default for SdeValidation {
    fn default() -> Self {
        Self {
            max_residual: 1e-4,
            sigma_bar_sign: 1.0,
        }
    }
}

/// Per-step comparison of realized and predicted moment increments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSdeReport {
    /// Largest residual over paths at each step.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Largest realized increment, for scale.
    pub max_increment: f64,
    pub within_tolerance: bool,
}

impl MomentSdeReport {
    /// Root mean square of the per-step residuals; steadier than the maximum
    /// when comparing runs driven by different Brownian draws.
    pub fn rms_residual(&self) -> f64 {
        if self.residuals.is_empty() {
            return 0.0;
        }
        (self.residuals.iter().map(|v| v * v).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }
}

/// `ln(coarse/fine)/ln(ratio)`: the observed order of a residual when the
/// step shrinks by `ratio`.
pub fn scaling_exponent(coarse: f64, fine: f64, ratio: f64) -> f64 {
    (coarse / fine).ln() / ratio.ln()
}

fn validate(
    ens: &Ensemble,
    opts: &SdeValidation,
    predict: impl Fn(&MomentState, &[f64], f64) -> f64,
    observe: impl Fn(&MomentState) -> f64,
) -> Result<MomentSdeReport> {
    let cfg = &ens.config;
    let dynamics = Dynamics::new(
        &cfg.grid,
        &cfg.vol_spec,
        &cfg.mpr,
        StepOptions::from_config(cfg),
    )?;
    let mut residuals = vec![0.0_f64; cfg.n_steps];
    let mut max_increment = 0.0_f64;
    for p in &ens.paths {
        let (traj, inc) = match (&p.trajectory, &p.increments) {
            (Some(t), Some(i)) => (t, i),
            _ => {
                return Err(Error::InvalidParams(
                    "ensemble was run without keep_trajectories".into(),
                ))
            }
        };
        let mut prev = moment_state(&cfg.grid, &traj[0], &dynamics.sigma(&traj[0]));
        for (n, dw) in inc.iter().enumerate() {
            let s = &traj[n];
            let lambda = dynamics.lambda(s);
            let dw_star: Vec<f64> = dw
                .iter()
                .zip(&lambda)
                .map(|(w, l)| w + l * cfg.dt)
                .collect();
            let next = moment_state(&cfg.grid, &traj[n + 1], &dynamics.sigma(&traj[n + 1]));
            let realized = observe(&next) - observe(&prev);
            let predicted = predict(&prev, &dw_star, cfg.dt);
            residuals[n] = residuals[n].max((realized - predicted).abs());
            max_increment = max_increment.max(realized.abs());
            prev = next;
        }
    }
    let max_residual = residuals.iter().copied().fold(0.0, f64::max);
    Ok(MomentSdeReport {
        residuals,
        max_residual,
        max_increment,
        within_tolerance: max_residual <= opts.max_residual,
    })
}

/// Compares `Δx̄` along every path with `(r x̄ − 1)Δt + Σ̄·ΔW*`, where
/// `ΔW* = ΔW + λΔt`. Needs an ensemble run with `keep_trajectories`.
pub fn validate_mean_sde(ens: &Ensemble, opts: &SdeValidation) -> Result<MomentSdeReport> {
    let sign = opts.sigma_bar_sign;
    validate(
        ens,
        opts,
        |m, dw, dt| (m.r * m.mean - 1.0) * dt + sign * dot(&m.sigma_bar, dw),
        |m| m.mean,
    )
}

/// Compares `Δv` with `(r(v − x̄²) − |Σ̄|²)Δt + 2(Σ̄⁽¹⁾ − x̄Σ̄)·ΔW*`.
pub fn validate_variance_sde(ens: &Ensemble, opts: &SdeValidation) -> Result<MomentSdeReport> {
    let sign = opts.sigma_bar_sign;
    validate(
        ens,
        opts,
        |m, dw, dt| {
            let s2 = dot(&m.sigma_bar, &m.sigma_bar);
            let shear: f64 = (0..dw.len())
                .map(|k| (m.sigma_bar1[k] - sign * m.mean * m.sigma_bar[k]) * dw[k])
                .sum();
            (m.r * (m.variance - m.mean * m.mean) - s2) * dt + 2.0 * shear
        },
        |m| m.variance,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentPathRow {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    pub sigma_bar_norm: f64,
    pub sigma_bar1_norm: f64,
    pub xbar_star: f64,
    pub variance_gap_level: f64,
}

/// Moment time series of one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentPathRecord {
    pub path_id: usize,
    pub rows: Vec<MomentPathRow>,
}

/// Moment series of path `path`, from its trajectory when kept and from its
/// snapshot densities otherwise.
pub fn moment_path(ens: &Ensemble, path: usize) -> Result<MomentPathRecord> {
    let cfg = &ens.config;
    let p = ens
        .paths
        .get(path)
        .ok_or_else(|| Error::InvalidParams(format!("no path {path}")))?;
    let states: Vec<&DensityPathState> = match &p.trajectory {
        Some(t) => t.iter().collect(),
        None => p
            .snapshots
            .iter()
            .filter_map(|s| s.state.as_ref())
            .collect(),
    };
    if states.is_empty() {
        return Err(Error::InvalidParams("path kept no densities".into()));
    }
    let dynamics = Dynamics::new(
        &cfg.grid,
        &cfg.vol_spec,
        &cfg.mpr,
        StepOptions::from_config(cfg),
    )?;
    let norm = |v: &[f64]| dot(v, v).sqrt();
    let rows = states
        .into_iter()
        .map(|s| {
            let m = moment_state(&cfg.grid, s, &dynamics.sigma(s));
            let c = critical_levels(&m, &dynamics.lambda(s))?;
            Ok(MomentPathRow {
                t: m.t,
                mean: m.mean,
                variance: m.variance,
                sigma_bar_norm: norm(&m.sigma_bar),
                sigma_bar1_norm: norm(&m.sigma_bar1),
                xbar_star: c.mean,
                variance_gap_level: c.variance_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentPathRecord {
        path_id: path,
        rows,
    })
}
