//! The square-root embedding `ξ = √ρ` and its dynamics on the unit sphere of
//! `L²(0, ∞)`.
//!
//! On the grid the Hilbert space is `ℝⁿ` with the trapezoid inner product
//! `⟨f, g⟩ = fᵀWg`, and `∂ₓ` is the upwind matrix `D` of the density
//! module. The bilinear form `WD` splits into a symmetric part `S` and an
//! antisymmetric part `A`; only `S` contributes to `⟨ξ, Dξ⟩ = −½r`.

mod operator;

pub use operator::{BandedMatrix, DiscretizedOperator};

use serde::Serialize;

use crate::curve::TermStructureDensity;
use crate::dynamics::{
    BrownianStream, DensityPathState, Dynamics, SimConfig, StepDiagnostics, StepOptions,
};
use crate::error::{Error, Result};
use crate::grid::MaturityGrid;

/// A point on the positive orthant of the sphere.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphereState {
    pub t: f64,
    pub xi: Vec<f64>,
    /// `∫ρ` beyond the grid.
    pub tail_mass: f64,
    /// `∫ξ² + tail`.
    pub norm: f64,
}

impl SphereState {
    pub fn density(&self) -> Vec<f64> {
        self.xi.iter().map(|v| v * v).collect()
    }
}

/// `ξ = √ρ` pointwise.
pub fn embed(rho: &TermStructureDensity) -> Result<SphereState> {
    embed_values(rho.grid(), rho.values(), rho.tail_mass(), 0.0)
}

/// `ξ = √ρ` for raw grid values at time `t`.
pub fn embed_values(
    grid: &MaturityGrid,
    rho: &[f64],
    tail_mass: f64,
    t: f64,
) -> Result<SphereState> {
    if rho.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if let Some((index, &value)) = rho
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
    {
        return Err(Error::NegativeDensity { index, value });
    }
    let xi: Vec<f64> = rho.iter().map(|v| v.sqrt()).collect();
    Ok(SphereState {
        t,
        norm: grid.inner(&xi, &xi) + tail_mass,
        xi,
        tail_mass,
    })
}

/// `r = −2∫₀^∞ ξ∂ₓξ`: the quadratic form `−2ξᵀWDξ` on the grid plus the
/// flux `ξ(x_max)²` of the part beyond it.
pub fn short_rate_from_state(op: &DiscretizedOperator, s: &SphereState) -> f64 {
    let n = s.xi.len();
    -2.0 * op.quadratic_form(&s.xi) + s.xi[n - 1] * s.xi[n - 1]
}

/// `σ_k = ν_k − ⟨ξ, ν_kξ⟩/⟨ξ, ξ⟩`.
pub fn center_sigma(grid: &MaturityGrid, nu: &[Vec<f64>], xi: &[f64]) -> Vec<Vec<f64>> {
    let rho: Vec<f64> = xi.iter().map(|v| v * v).collect();
    crate::dynamics::effective_sigma(grid, nu, &rho)
}

/// Euler step of `dξ = (∂ₓξ + ½rξ − ⅛|σ|²ξ)dt + ½ξσ·(dW + λdt)`.
///
/// Positivity and blow-up are handled as in the density module, with the
/// caps applied to `ξ²`. The mass beyond the grid follows the roll.
#[allow(clippy::too_many_arguments)]
pub fn step_sphere(
    op: &DiscretizedOperator,
    s: &SphereState,
    sigma: &[Vec<f64>],
    lambda: &[f64],
    r: f64,
    dt: f64,
    dw: &[f64],
    opts: &StepOptions,
) -> Result<(SphereState, StepDiagnostics)> {
    let d = dw.len();
    if sigma.len() != d || lambda.len() != d {
        return Err(Error::InvalidParams(format!("expected {d} factors")));
    }
    let grid = op.grid();
    let n = s.xi.len();
    let dxi = op.apply(&s.xi);
    let mut next = vec![0.0; n];
    let mut clamp_events = 0;
    for i in 0..n {
        let mut shock = 0.0;
        let mut var = 0.0;
        for k in 0..d {
            let sk = sigma[k][i];
            shock += sk * (dw[k] + lambda[k] * dt);
            var += sk * sk;
        }
        let x = s.xi[i];
        let v = x + (dxi[i] + 0.5 * r * x - 0.125 * var * x) * dt + 0.5 * x * shock;
        next[i] = if v <= 0.0 {
            clamp_events += 1;
            f64::MIN_POSITIVE.sqrt()
        } else {
            v
        };
    }
    if clamp_events > opts.clamp_budget {
        return Err(Error::PositivityLoss(format!(
            "{clamp_events} nodes clamped in one step"
        )));
    }
    let mut max = 0.0_f64;
    for &v in &next {
        if !v.is_finite() {
            return Err(Error::BlowUp("non-finite state".into()));
        }
        max = max.max(v * v);
    }
    if max > opts.blowup_cap {
        return Err(Error::BlowUp(format!("density reached {max:e}")));
    }
    let tail_mass = (s.tail_mass + (r * s.tail_mass - s.xi[n - 1] * s.xi[n - 1]) * dt).max(0.0);
    let grid_norm = grid.inner(&next, &next);
    let norm_err_pre = (grid_norm + tail_mass - 1.0).abs();
    if opts.renormalize {
        let c = ((1.0 - tail_mass) / grid_norm).sqrt();
        next.iter_mut().for_each(|v| *v *= c);
    }
    let norm = grid.inner(&next, &next) + tail_mass;
    let min_rho = next.iter().map(|v| v * v).fold(f64::INFINITY, f64::min);
    let rho: Vec<f64> = s.xi.iter().map(|v| v * v).collect();
    let constraint_resid: Vec<f64> =
        crate::dynamics::volatility_constraint_residual(grid, &rho, sigma)
            .into_iter()
            .map(f64::abs)
            .collect();
    let diag = StepDiagnostics {
        norm_err_pre,
        min_rho,
        constraint_resid,
        clamp_events,
        short_rate_fd_gap: 0.0,
    };
    Ok((
        SphereState {
            t: s.t + dt,
            xi: next,
            tail_mass,
            norm,
        },
        diag,
    ))
}

/// Pieces of the transport drift `Dξ` at a state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftDecomposition {
    /// `D̃ξ = Dξ − mξ` with `m = ⟨ξ, Dξ⟩/⟨ξ, ξ⟩`.
    pub tangential: Vec<f64>,
    /// `m`, the radial coefficient removed from `Dξ`.
    pub radial: f64,
    /// `W⁻¹Sξ`, the symmetric-part action.
    pub gradient_part: Vec<f64>,
    /// `W⁻¹Aξ`, the antisymmetric-part action.
    pub symmetry_part: Vec<f64>,
    /// `⟨ξ, D̃ξ⟩`.
    pub tangency_residual: f64,
    /// `⟨ξ, W⁻¹Aξ⟩`.
    pub antisymmetric_residual: f64,
    pub norm: f64,
    pub r: f64,
    /// Directional derivative of `r` along the tangential projection of the
    /// symmetric-part drift.
    pub gradient_dot_r: f64,
}

/// The JSON summary of a [`DriftDecomposition`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub tangency_residual: f64,
    pub norm: f64,
    pub r: f64,
    pub gradient_dot_r: f64,
}

impl DriftDecomposition {
    pub fn report(&self) -> DecompositionReport {
        DecompositionReport {
            tangency_residual: self.tangency_residual,
            norm: self.norm,
            r: self.r,
            gradient_dot_r: self.gradient_dot_r,
        }
    }
}

pub fn drift_decomposition(op: &DiscretizedOperator, s: &SphereState) -> DriftDecomposition {
    let grid = op.grid();
    let xi = &s.xi;
    let dxi = op.apply(xi);
    let nn = grid.inner(xi, xi);
    let m = grid.inner(xi, &dxi) / nn;
    let tangential: Vec<f64> = dxi.iter().zip(xi).map(|(a, b)| a - m * b).collect();
    let gradient_part = op.symmetric_action(xi);
    let symmetry_part = op.antisymmetric_action(xi);

    // tangential projection of the symmetric-part drift
    let gm = grid.inner(xi, &gradient_part) / nn;
    let v: Vec<f64> = gradient_part
        .iter()
        .zip(xi)
        .map(|(a, b)| a - gm * b)
        .collect();
    let vn = grid.inner(&v, &v).sqrt();
    let gradient_dot_r = if vn > 0.0 {
        // r is quadratic in ξ, so the central difference is exact
        let eps = 1e-6 * nn.sqrt() / vn;
        let shifted = |c: f64| SphereState {
            xi: xi.iter().zip(&v).map(|(a, b)| a + c * b).collect(),
            ..s.clone()
        };
        (short_rate_from_state(op, &shifted(eps)) - short_rate_from_state(op, &shifted(-eps)))
            / (2.0 * eps)
    } else {
        0.0
    };
    DriftDecomposition {
        tangency_residual: grid.inner(xi, &tangential),
        antisymmetric_residual: grid.inner(xi, &symmetry_part),
        tangential,
        radial: m,
        gradient_part,
        symmetry_part,
        norm: s.norm,
        r: short_rate_from_state(op, s),
        gradient_dot_r,
    }
}

/// Side-by-side run of the density and square-root schemes on one path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedRun {
    /// `max |ξ² − ρ|` after each step.
    pub sup_gap: Vec<f64>,
    /// `|⟨ξ, D̃ξ⟩|` at each step's starting state.
    pub tangency: Vec<f64>,
    /// Pre-projection norm error of the sphere scheme at each step.
    pub sphere_norm_err: Vec<f64>,
    pub density: DensityPathState,
    pub sphere: SphereState,
}

/// Steps both representations from `rho0` with the same increments.
///
/// `increments[n]` is the Brownian increment of step `n`; `cfg` supplies the
/// grid, step, volatility, market price of risk and scheme settings.
pub fn paired_run(
    rho0: &TermStructureDensity,
    cfg: &SimConfig,
    increments: &[Vec<f64>],
) -> Result<PairedRun> {
    if !rho0.grid().same_as(&cfg.grid) {
        return Err(Error::GridMismatch);
    }
    let opts = StepOptions::from_config(cfg);
    let dynamics = Dynamics::new(&cfg.grid, &cfg.vol_spec, &cfg.mpr, opts)?;
    let op = DiscretizedOperator::new(&cfg.grid);
    let mut rho = DensityPathState::initial(rho0, cfg.d);
    let mut xi = embed_values(&cfg.grid, &rho.rho, rho.tail_mass, 0.0)?;
    let mut out = PairedRun {
        sup_gap: Vec::with_capacity(increments.len()),
        tangency: Vec::with_capacity(increments.len()),
        sphere_norm_err: Vec::with_capacity(increments.len()),
        density: rho.clone(),
        sphere: xi.clone(),
    };
    for (step, dw) in increments.iter().enumerate() {
        let wrap = |e: Error| Error::Simulation {
            path: 0,
            step: step + 1,
            source: Box::new(e),
        };
        out.tangency
            .push(drift_decomposition(&op, &xi).tangency_residual.abs());
        let summary = crate::dynamics::StateSummary {
            t: xi.t,
            short_rate: xi.xi[0] * xi.xi[0],
        };
        let nu = cfg
            .vol_spec
            .evaluate(cfg.grid.nodes(), &summary, cfg.vol_cap);
        let sigma = center_sigma(&cfg.grid, &nu, &xi.xi);
        let lambda = cfg.mpr.evaluate(cfg.d, &summary, cfg.mpr_cap);
        let (nx, d) = step_sphere(
            &op,
            &xi,
            &sigma,
            &lambda,
            summary.short_rate,
            cfg.dt,
            dw,
            &opts,
        )
        .map_err(wrap)?;
        let (nr, _) = dynamics.step(&rho, cfg.dt, dw).map_err(wrap)?;
        out.sup_gap.push(
            nx.xi
                .iter()
                .zip(&nr.rho)
                .map(|(a, b)| (a * a - b).abs())
                .fold(0.0, f64::max),
        );
        out.sphere_norm_err.push(d.norm_err_pre);
        xi = nx;
        rho = nr;
    }
    out.density = rho;
    out.sphere = xi;
    Ok(out)
}

/// `n_steps` Brownian increments of size `dt` for path `path_id`, refined by
/// `refine` substeps each: the increments of the coarse steps are the sums
/// of the fine ones, so runs at different `refine` share one Brownian path.
pub fn refined_increments(
    seed: u64,
    path_id: u64,
    factors: usize,
    dt: f64,
    n_steps: usize,
    refine: usize,
) -> Vec<Vec<f64>> {
    let mut rng = BrownianStream::new(seed, path_id, factors);
    let mut out = Vec::with_capacity(n_steps * refine);
    for _ in 0..n_steps * refine {
        out.push(rng.next_increment(dt / refine as f64));
    }
    out
}

/// Sums consecutive groups of `by` increments.
pub fn coarsen(increments: &[Vec<f64>], by: usize) -> Vec<Vec<f64>> {
    increments
        .chunks(by)
        .map(|c| {
            let mut s = vec![0.0; c[0].len()];
            for v in c {
                s.iter_mut().zip(v).for_each(|(a, b)| *a += b);
            }
            s
        })
        .collect()
}

#[cfg(test)]
mod tests;
