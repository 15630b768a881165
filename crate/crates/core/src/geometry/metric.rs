use nalgebra::DMatrix;
use serde::Serialize;

use super::family::{ParametricFamily, Support, MAX_DIM};
use crate::error::{Error, Result};
use crate::quadrature::FixedRule;

/// Step of the double-exponential rule used for metric integrals.
pub const METRIC_RULE_STEP: f64 = 1.0 / 32.0;

/// Relative weight of the outermost quadrature nodes above which the metric
/// integral is reported as divergent.
const EDGE_TOLERANCE: f64 = 1e-9;

/// Symmetric `r × r` matrix at a parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricTensor {
    pub dim: usize,
    /// Row-major entries.
    pub entries: Vec<f64>,
}

impl MetricTensor {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|v| c * v).collect(),
        }
    }

    /// `g(u, v)`.
    pub fn quadratic(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.get(i, j) * u[i] * v[j];
            }
        }
        s
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.to_matrix()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    }
}

/// Christoffel symbols of the second kind, `Γ^i_{jk}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    pub dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.dim + j) * self.dim + k]
    }

    /// `−Γ^i_{jk} vʲ vᵏ`, the geodesic acceleration.
    pub fn acceleration(&self, v: &[f64], out: &mut [f64]) {
        let r = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(r) {
            let mut s = 0.0;
            for j in 0..r {
                for k in 0..r {
                    s += self.get(i, j, k) * v[j] * v[k];
                }
            }
            *o = -s;
        }
    }
}

/// Fisher–Rao metric `g_ij = ¼ ∫ ρ ∂ᵢ ln ρ ∂ⱼ ln ρ dx` of a family, evaluated
/// with a fixed double-exponential rule placed by the family's frame.
pub struct FisherRao<'a, F: ParametricFamily + ?Sized> {
    family: &'a F,
    rule: FixedRule,
    /// Relative finite-difference step for metric derivatives.
    pub fd_step: f64,
}

impl<'a, F: ParametricFamily + ?Sized> FisherRao<'a, F> {
    pub fn new(family: &'a F) -> Self {
        let rule = match family.support() {
            Support::HalfLine => FixedRule::half_line(METRIC_RULE_STEP),
            Support::RealLine => FixedRule::real_line(METRIC_RULE_STEP),
        };
        Self {
            family,
            rule,
            fd_step: 1e-4,
        }
    }

    pub fn family(&self) -> &F {
        self.family
    }

    pub fn metric(&self, theta: &[f64]) -> Result<MetricTensor> {
        let r = self.family.dim();
        if r == 0 || r > MAX_DIM {
            return Err(Error::InvalidParams(format!(
                "family dimension {r} unsupported"
            )));
        }
        if !self.family.in_domain(theta) {
            return Err(Error::DomainExit(theta.to_vec()));
        }
        let (origin, scale) = self.family.frame(theta);
        let mut acc = [0.0; MAX_DIM * MAX_DIM];
        let mut grad = [0.0; MAX_DIM];
        let n = self.rule.len();
        let mut edge = 0.0_f64;
        for (idx, (x, w)) in self.rule.mapped(origin, scale).enumerate() {
            let p = self.family.density(theta, x);
            if p == 0.0 {
                continue;
            }
            self.family.grad_log_density(theta, x, &mut grad[..r]);
            let wp = w * p;
            for i in 0..r {
                for j in i..r {
                    acc[i * r + j] += wp * grad[i] * grad[j];
                }
            }
            if idx < 2 || idx + 2 >= n {
                let t: f64 = (0..r).map(|i| wp * grad[i] * grad[i]).sum();
                edge = edge.max(t.abs());
            }
        }
        let mut entries = vec![0.0; r * r];
        for i in 0..r {
            for j in i..r {
                let v = 0.25 * acc[i * r + j];
                entries[i * r + j] = v;
                entries[j * r + i] = v;
            }
        }
        let trace: f64 = (0..r).map(|i| entries[i * r + i]).sum();
        if !entries.iter().all(|v| v.is_finite()) || 0.25 * edge > EDGE_TOLERANCE * trace {
            return Err(Error::QuadratureDivergence(format!(
                "Fisher information integral at {theta:?} does not converge"
            )));
        }
        Ok(MetricTensor { dim: r, entries })
    }

    /// Christoffel symbols from central differences of the metric with step
    /// `fd_step·(1 + |θ_l|)` in each coordinate.
    pub fn christoffel(&self, theta: &[f64]) -> Result<Christoffel> {
        let r = self.family.dim();
        let g = self.metric(theta)?;
        let ginv = g
            .to_matrix()
            .cholesky()
            .ok_or_else(|| Error::SingularMetric(theta.to_vec()))?
            .inverse();
        // dg[l][k][m] = ∂_l g_km
        let mut dg = vec![0.0; r * r * r];
        let mut tp = theta.to_vec();
        for l in 0..r {
            let h = self.fd_step * (1.0 + theta[l].abs());
            tp[l] = theta[l] + h;
            let gp = self.metric(&tp)?;
            tp[l] = theta[l] - h;
            let gm = self.metric(&tp)?;
            tp[l] = theta[l];
            for km in 0..r * r {
                dg[l * r * r + km] = (gp.entries[km] - gm.entries[km]) / (2.0 * h);
            }
        }
        let d = |l: usize, k: usize, m: usize| dg[(l * r + k) * r + m];
        let mut data = vec![0.0; r * r * r];
        for i in 0..r {
            for j in 0..r {
                for k in j..r {
                    let mut s = 0.0;
                    for l in 0..r {
                        s += ginv[(i, l)] * (d(j, k, l) + d(k, j, l) - d(l, j, k));
                    }
                    data[(i * r + j) * r + k] = 0.5 * s;
                    data[(i * r + k) * r + j] = 0.5 * s;
                }
            }
        }
        Ok(Christoffel { dim: r, data })
    }
}

/// `g(θ)` for `family`.
pub fn fisher_rao_metric<F: ParametricFamily + ?Sized>(
    family: &F,
    theta: &[f64],
) -> Result<MetricTensor> {
    FisherRao::new(family).metric(theta)
}

/// `Γ(θ)` for `family`, with relative finite-difference step `fd_step`.
pub fn christoffel<F: ParametricFamily + ?Sized>(
    family: &F,
    theta: &[f64],
    fd_step: f64,
) -> Result<Christoffel> {
    let mut fr = FisherRao::new(family);
    fr.fd_step = fd_step;
    fr.christoffel(theta)
}
