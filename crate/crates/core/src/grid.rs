//! Uniform maturity grids and the finite-difference stencils defined on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

pub const DEFAULT_X_MAX: f64 = 200.0;
pub const DEFAULT_NODES: usize = 4096;
pub const MIN_NODES: usize = 16;

/// Uniformly spaced maturities `0 = x_0 < x_1 < … < x_{n-1} = x_max`, in years.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct MaturityGrid {
    nodes: Vec<f64>,
    step: f64,
}

/// Serialized form: `{"x_max": 200.0, "n_nodes": 4096}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_max: f64,
    pub n_nodes: usize,
}

impl TryFrom<GridSpec> for MaturityGrid {
    type Error = Error;
    fn try_from(spec: GridSpec) -> Result<Self> {
        MaturityGrid::uniform(spec.x_max, spec.n_nodes)
    }
}

impl From<MaturityGrid> for GridSpec {
    fn from(g: MaturityGrid) -> Self {
        GridSpec {
            x_max: g.x_max(),
            n_nodes: g.len(),
        }
    }
}

impl Default for MaturityGrid {
    fn default() -> Self {
        Self::uniform(DEFAULT_X_MAX, DEFAULT_NODES).expect("default grid is valid")
    }
}

impl MaturityGrid {
    pub fn uniform(x_max: f64, n_nodes: usize) -> Result<Self> {
        if !(x_max.is_finite() && x_max > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "x_max must be positive, got {x_max}"
            )));
        }
        if n_nodes < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes, got {n_nodes}"
            )));
        }
        let step = x_max / (n_nodes - 1) as f64;
        let mut nodes: Vec<f64> = (0..n_nodes).map(|i| i as f64 * step).collect();
        nodes[n_nodes - 1] = x_max;
        Ok(Self { nodes, step })
    }

    /// Accepts explicit nodes; they must start at zero and be uniformly spaced.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < MIN_NODES {
            return Err(Error::InvalidGrid(format!(
                "need at least {MIN_NODES} nodes, got {}",
                nodes.len()
            )));
        }
        if nodes[0] != 0.0 {
            return Err(Error::InvalidGrid("first node must be 0".into()));
        }
        let x_max = nodes[nodes.len() - 1];
        let step = x_max / (nodes.len() - 1) as f64;
        for (i, pair) in nodes.windows(2).enumerate() {
            if !(pair[1] > pair[0]) {
                return Err(Error::InvalidGrid(format!(
                    "nodes not increasing at index {}",
                    i + 1
                )));
            }
            if ((pair[1] - pair[0]) - step).abs() > 1e-9 * step.max(1.0) {
                return Err(Error::InvalidGrid("nodes must be uniformly spaced".into()));
            }
        }
        Self::uniform(x_max, nodes.len())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn x_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn weights(&self) -> Vec<f64> {
        quadrature::trapezoid_weights(self.len(), self.step)
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        quadrature::trapezoid(values, self.step)
    }

    /// ∫ f·g on the grid.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        let n = f.len();
        let inner: f64 = (1..n - 1).map(|i| f[i] * g[i]).sum();
        self.step * (inner + 0.5 * (f[0] * g[0] + f[n - 1] * g[n - 1]))
    }

    pub fn cumulative(&self, values: &[f64]) -> Vec<f64> {
        quadrature::cumulative_trapezoid(values, self.step)
    }

    /// ∫₀^x of the piecewise-linear interpolant of `values`.
    pub fn integrate_to(&self, values: &[f64], x: f64) -> Result<f64> {
        if !(0.0..=self.x_max()).contains(&x) {
            return Err(Error::OutOfGrid {
                x,
                x_max: self.x_max(),
            });
        }
        let h = self.step;
        let i = ((x / h).floor() as usize).min(self.len() - 2);
        let mut acc = 0.0;
        for j in 0..i {
            acc += 0.5 * h * (values[j] + values[j + 1]);
        }
        let s = x - self.nodes[i];
        let slope = (values[i + 1] - values[i]) / h;
        Ok(acc + s * (values[i] + 0.5 * slope * s))
    }

    /// Second-order central differences in the interior, second-order
    /// one-sided stencils at both ends.
    pub fn derivative_central(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        let h = self.step;
        let mut d = vec![0.0; n];
        d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
        for i in 1..n - 1 {
            d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
        }
        d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
        d
    }

    /// Second-order one-sided differences taken from the right, i.e. upwind
    /// for the transport term ∂ₓ that rolls the curve toward x = 0. The last
    /// two nodes fall back to the backward stencil.
    pub fn derivative_upwind(&self, values: &[f64]) -> Vec<f64> {
        let mut d = vec![0.0; values.len()];
        self.derivative_upwind_into(values, &mut d);
        d
    }

    pub fn derivative_upwind_into(&self, values: &[f64], out: &mut [f64]) {
        let n = values.len();
        let inv = 1.0 / (2.0 * self.step);
        for i in 0..n - 2 {
            out[i] = (-3.0 * values[i] + 4.0 * values[i + 1] - values[i + 2]) * inv;
        }
        for i in n - 2..n {
            out[i] = (3.0 * values[i] - 4.0 * values[i - 1] + values[i - 2]) * inv;
        }
    }

    /// Stencil coefficients of [`Self::derivative_upwind`] for row `i`, as
    /// `(column, coefficient)` pairs.
    pub fn upwind_row(&self, i: usize) -> [(usize, f64); 3] {
        let n = self.len();
        let inv = 1.0 / (2.0 * self.step);
        if i + 2 < n {
            [(i, -3.0 * inv), (i + 1, 4.0 * inv), (i + 2, -inv)]
        } else {
            [(i - 2, inv), (i - 1, -4.0 * inv), (i, 3.0 * inv)]
        }
    }

    pub fn same_as(&self, other: &MaturityGrid) -> bool {
        self.len() == other.len() && self.x_max() == other.x_max()
    }
}
