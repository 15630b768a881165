use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{DensityPathState, Dynamics, SimConfig, StepDiagnostics, StepOptions};
use crate::curve::TermStructureDensity;
use crate::error::{Error, Result};
use crate::grid::MaturityGrid;

/// Gaussian increments for one path: a ChaCha8 stream selected by the path
/// index under a common seed, mapped through the normal quantile.
pub struct BrownianStream {
    rng: ChaCha8Rng,
    normal: Normal,
    factors: usize,
}

impl BrownianStream {
    pub fn new(seed: u64, path_id: u64, factors: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_id);
        Self {
            rng,
            normal: Normal::standard(),
            factors,
        }
    }

    pub fn next_normal(&mut self) -> f64 {
        let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64);
        self.normal.inverse_cdf(u)
    }

    /// `√dt · Z` for each factor.
    pub fn next_increment(&mut self, dt: f64) -> Vec<f64> {
        let s = dt.sqrt();
        (0..self.factors).map(|_| s * self.next_normal()).collect()
    }
}

/// A path's state at a recorded step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub short_rate: f64,
    pub numeraire: f64,
    /// `P(t, T)/N_t` for each tracked calendar maturity `T`.
    pub deflated_prices: Vec<f64>,
    /// Present when the config keeps snapshot densities.
    pub state: Option<DensityPathState>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub path_id: usize,
    pub snapshots: Vec<Snapshot>,
    pub terminal: DensityPathState,
    /// Every state from step 0 to the end, when requested.
    pub trajectory: Option<Vec<DensityPathState>>,
    /// Every Brownian increment, when requested.
    pub increments: Option<Vec<Vec<f64>>>,
}

/// Output of [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub config: SimConfig,
    /// Steps at which snapshots were taken: the requested ones plus the
    /// first and last.
    pub snapshot_steps: Vec<usize>,
    pub paths: Vec<PathResult>,
    /// Per step, the worst case over paths.
    pub diagnostics: Vec<StepDiagnostics>,
}

impl Ensemble {
    pub fn grid(&self) -> &MaturityGrid {
        &self.config.grid
    }
}

fn snapshot(
    grid: &MaturityGrid,
    state: &DensityPathState,
    step: usize,
    cfg: &SimConfig,
) -> Result<Snapshot> {
    let mut deflated_prices = Vec::with_capacity(cfg.track_maturities.len());
    for &mat in &cfg.track_maturities {
        let x = (mat - state.t).max(0.0);
        let p = super::bond_price_from_state(grid, state, x)?;
        deflated_prices.push(p / state.numeraire);
    }
    Ok(Snapshot {
        step,
        t: state.t,
        short_rate: state.r,
        numeraire: state.numeraire,
        deflated_prices,
        state: cfg.keep_snapshot_densities.then(|| state.clone()),
    })
}

fn run_path(
    dynamics: &Dynamics,
    cfg: &SimConfig,
    init: &DensityPathState,
    path_id: usize,
    snapshot_steps: &[usize],
) -> Result<(PathResult, Vec<StepDiagnostics>)> {
    let grid = dynamics.grid();
    let mut rng = BrownianStream::new(cfg.seed, path_id as u64, cfg.d);
    let mut state = init.clone();
    let mut diags = Vec::with_capacity(cfg.n_steps);
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    let mut trajectory = cfg.keep_trajectories.then(|| vec![init.clone()]);
    let mut increments = cfg.keep_trajectories.then(Vec::new);
    let mut next_snap = snapshot_steps.iter().peekable();
    let wrap = |step: usize, e: Error| Error::Simulation {
        path: path_id,
        step,
        source: Box::new(e),
    };
    for step in 0..=cfg.n_steps {
        if next_snap.peek() == Some(&&step) {
            snapshots.push(snapshot(grid, &state, step, cfg).map_err(|e| wrap(step, e))?);
            next_snap.next();
        }
        if step == cfg.n_steps {
            break;
        }
        let dw = rng.next_increment(cfg.dt);
        let (next, d) = dynamics
            .step(&state, cfg.dt, &dw)
            .map_err(|e| wrap(step + 1, e))?;
        diags.push(d);
        state = next;
        if let Some(t) = trajectory.as_mut() {
            t.push(state.clone());
        }
        if let Some(inc) = increments.as_mut() {
            inc.push(dw);
        }
    }
    Ok((
        PathResult {
            path_id,
            snapshots,
            terminal: state,
            trajectory,
            increments,
        },
        diags,
    ))
}

/// Runs `cfg.n_paths` independent paths from `rho0`.
///
/// Path `p` draws from its own substream of `cfg.seed`, so the ensemble does
/// not depend on how paths are scheduled. The first failing path (lowest
/// index) is reported.
pub fn simulate(rho0: &TermStructureDensity, cfg: &SimConfig) -> Result<Ensemble> {
    cfg.validate()?;
    if !rho0.grid().same_as(&cfg.grid) {
        return Err(Error::GridMismatch);
    }
    let dynamics = Dynamics::new(
        &cfg.grid,
        &cfg.vol_spec,
        &cfg.mpr,
        StepOptions::from_config(cfg),
    )?;
    let init = DensityPathState::initial(rho0, cfg.d);
    let mut snapshot_steps = cfg.snapshots.clone();
    snapshot_steps.extend([0, cfg.n_steps]);
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let results: Vec<Result<(PathResult, Vec<StepDiagnostics>)>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| run_path(&dynamics, cfg, &init, p, &snapshot_steps))
        .collect();
    let mut paths = Vec::with_capacity(cfg.n_paths);
    let mut diagnostics: Vec<StepDiagnostics> = Vec::new();
    for r in results {
        let (path, diags) = r?;
        if diagnostics.is_empty() {
            diagnostics = diags;
        } else {
            for (a, b) in diagnostics.iter_mut().zip(&diags) {
                *a = a.merge(b);
            }
        }
        paths.push(path);
    }
    Ok(Ensemble {
        config: cfg.clone(),
        snapshot_steps,
        paths,
        diagnostics,
    })
}

/// Monte Carlo statistics of `P(t,T)/N_t` for one maturity at one snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleRow {
    pub maturity: f64,
    pub step: usize,
    pub t: f64,
    /// Mean of `P(t,T)/N_t` over paths.
    pub mean: f64,
    /// Mean of `P(t,T)/N_t − P(0,T)` over paths.
    pub drift: f64,
    pub std_err: f64,
}

impl MartingaleRow {
    /// `drift / std_err`, or 0 when both vanish.
    pub fn z_score(&self) -> f64 {
        if self.std_err > 0.0 {
            self.drift / self.std_err
        } else if self.drift == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub rows: Vec<MartingaleRow>,
}

impl MartingaleReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.z_score().abs())
            .fold(0.0, f64::max)
    }
}

/// Tests that deflated bond prices have no drift.
///
/// Maturities listed in `track_maturities` use the prices recorded during
/// the run; others are priced from kept snapshot densities. Snapshots past a
/// maturity are skipped.
pub fn martingale_check(ensemble: &Ensemble, maturities: &[f64]) -> Result<MartingaleReport> {
    let grid = ensemble.grid();
    let cfg = &ensemble.config;
    let mut rows = Vec::new();
    for &mat in maturities {
        let tracked = cfg
            .track_maturities
            .iter()
            .position(|&m| (m - mat).abs() <= 1e-12);
        let value = |snap: &Snapshot| -> Result<f64> {
            if let Some(k) = tracked {
                return Ok(snap.deflated_prices[k]);
            }
            let state = snap.state.as_ref().ok_or_else(|| {
                Error::InvalidParams(format!(
                    "maturity {mat} was not tracked and no densities were kept"
                ))
            })?;
            Ok(super::bond_price_from_state(grid, state, mat - snap.t)? / snap.numeraire)
        };
        for (si, &step) in ensemble.snapshot_steps.iter().enumerate() {
            let t = ensemble.paths[0].snapshots[si].t;
            if t > mat {
                continue;
            }
            let mut values = Vec::with_capacity(ensemble.paths.len());
            let mut diffs = Vec::with_capacity(ensemble.paths.len());
            for p in &ensemble.paths {
                let v = value(&p.snapshots[si])?;
                values.push(v);
                diffs.push(v - value(&p.snapshots[0])?);
            }
            let n = diffs.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let drift = diffs.iter().sum::<f64>() / n;
            let std_err = if diffs.len() > 1 {
                let var = diffs.iter().map(|d| (d - drift).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            rows.push(MartingaleRow {
                maturity: mat,
                step,
                t,
                mean,
                drift,
                std_err,
            });
        }
    }
    Ok(MartingaleReport { rows })
}
