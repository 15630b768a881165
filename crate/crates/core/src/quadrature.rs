//! Numerical integration.
//!
//! Two families of rules live here:
//!
//! * composite trapezoid sums on uniform grids, used for every gridded
//!   density and for the cumulative integrals that turn densities back into
//!   discount curves;
//! * double-exponential (tanh-sinh, exp-sinh, sinh-sinh) rules for
//!   integrands that can be evaluated anywhere, e.g. closed-form densities on
//!   the half line. These converge geometrically in the number of nodes for
//!   analytic integrands, including algebraic tails.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

/// Composite trapezoid rule for samples on a uniform grid with spacing `h`.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Running trapezoid integral; `out[0] = 0`, `out[i] = ∫₀^{x_i}`.
pub fn cumulative_trapezoid(values: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for pair in values.windows(2) {
        acc += 0.5 * h * (pair[0] + pair[1]);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

/// Trapezoid weights for a uniform grid of `n` nodes.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Convergence controls for the adaptive double-exponential rules.
#[derive(Debug, Clone, Copy)]
pub struct DeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_level: u32,
}

impl Default for DeOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_tol: 1e-300,
            max_level: 9,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Map {
    /// x ∈ (a, b)
    Finite { a: f64, b: f64 },
    /// x ∈ (a, ∞), x = a + scale·exp(π/2·sinh t)
    HalfLine { a: f64, scale: f64 },
    /// x ∈ ℝ, x = center + scale·sinh(π/2·sinh t)
    RealLine { center: f64, scale: f64 },
}

impl Map {
    fn t_max(&self) -> f64 {
        match self {
            Map::Finite { .. } => 3.2,
            Map::HalfLine { .. } => 4.4,
            Map::RealLine { .. } => 3.0,
        }
    }

    /// Abscissa and Jacobian at parameter t. `None` when the node collapses
    /// onto an endpoint in floating point.
    fn node(&self, t: f64) -> Option<(f64, f64)> {
        let u = FRAC_PI_2 * t.sinh();
        let du = FRAC_PI_2 * t.cosh();
        match *self {
            Map::Finite { a, b } => {
                let half = 0.5 * (b - a);
                // distance from the nearer endpoint, computed without cancellation
                let e = (-2.0 * u.abs()).exp();
                let gap = half * 2.0 * e / (1.0 + e);
                let x = if u >= 0.0 { b - gap } else { a + gap };
                if x <= a || x >= b {
                    return None;
                }
                let sech = 2.0 / (u.exp() + (-u).exp());
                Some((x, half * du * sech * sech))
            }
            Map::HalfLine { a, scale } => {
                let y = u.exp();
                if !y.is_finite() || y == 0.0 {
                    return None;
                }
                Some((a + scale * y, scale * du * y))
            }
            Map::RealLine { center, scale } => {
                let s = u.sinh();
                if !s.is_finite() {
                    return None;
                }
                Some((center + scale * s, scale * du * u.cosh()))
            }
        }
    }
}

fn de_adaptive<F: FnMut(f64) -> f64>(map: Map, mut f: F, opts: DeOptions) -> Result<f64> {
    let t_max = map.t_max();
    let mut h = 0.5;
    let mut eval = |t: f64| -> Result<f64> {
        match map.node(t) {
            None => Ok(0.0),
            Some((x, jac)) => {
                let v = f(x);
                if v == 0.0 || jac == 0.0 {
                    return Ok(0.0);
                }
                let term = v * jac;
                if term.is_finite() {
                    Ok(term)
                } else {
                    Err(Error::QuadratureDivergence(format!(
                        "non-finite integrand at x = {x:e}"
                    )))
                }
            }
        }
    };

    let n0 = (t_max / h).ceil() as i64;
    let mut sum = 0.0;
    let mut edge: f64 = 0.0;
    for k in -n0..=n0 {
        let term = eval(k as f64 * h)?;
        if k.abs() == n0 {
            edge = edge.max(term.abs());
        }
        sum += term;
    }
    let mut estimate = h * sum;
    for level in 1..=opts.max_level {
        h *= 0.5;
        let n = n0 << level;
        let mut k = -n + 1;
        while k <= n {
            sum += eval(k as f64 * h)?;
            k += 2;
        }
        let next = h * sum;
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= 3 && (diff <= opts.rel_tol * next.abs() || diff <= opts.abs_tol) {
            // mass still present at the truncation point means the integral
            // does not converge (or the scale is badly chosen); finite
            // intervals only lose the endpoint singularity there
            let unbounded = !matches!(map, Map::Finite { .. });
            if unbounded && 0.5 * edge > 10.0 * opts.rel_tol * next.abs() + opts.abs_tol {
                return Err(Error::QuadratureDivergence(format!(
                    "integrand not negligible at truncation (edge term {edge:e})"
                )));
            }
            return Ok(next);
        }
    }
    Err(Error::QuadratureDivergence(format!(
        "no convergence after {} refinements (estimate {estimate:e})",
        opts.max_level
    )))
}

/// ∫_a^b f(x) dx by tanh-sinh quadrature.
pub fn integrate_finite<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: DeOptions,
) -> Result<f64> {
    if b == a {
        return Ok(0.0);
    }
    if b < a {
        return integrate_finite(f, b, a, opts).map(|v| -v);
    }
    de_adaptive(Map::Finite { a, b }, f, opts)
}

/// ∫_a^∞ f(x) dx by exp-sinh quadrature; `scale` should be comparable to the
/// width of the integrand's mass.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    opts: DeOptions,
) -> Result<f64> {
    de_adaptive(Map::HalfLine { a, scale }, f, opts)
}

/// ∫_ℝ f(x) dx by sinh-sinh quadrature centred at `center`.
pub fn integrate_real_line<F: FnMut(f64) -> f64>(
    f: F,
    center: f64,
    scale: f64,
    opts: DeOptions,
) -> Result<f64> {
    de_adaptive(Map::RealLine { center, scale }, f, opts)
}

/// A precomputed double-exponential rule in standardized coordinates, for
/// integrals evaluated many times with different location/scale (metric
/// tensors inside an ODE right-hand side, for example).
#[derive(Debug, Clone)]
pub struct FixedRule {
    nodes: Vec<(f64, f64)>,
    half_line: bool,
}

impl FixedRule {
    fn build(map: Map, h: f64, half_line: bool) -> Self {
        let t_max = map.t_max();
        let n = (t_max / h).ceil() as i64;
        let nodes = (-n..=n)
            .filter_map(|k| map.node(k as f64 * h))
            .map(|(y, w)| (y, w * h))
            .collect();
        Self { nodes, half_line }
    }

    /// Rule for ∫₀^∞ in units of `scale`.
    pub fn half_line(h: f64) -> Self {
        Self::build(Map::HalfLine { a: 0.0, scale: 1.0 }, h, true)
    }

    /// Rule for ∫_ℝ in units of `scale` around `center`.
    pub fn real_line(h: f64) -> Self {
        Self::build(
            Map::RealLine {
                center: 0.0,
                scale: 1.0,
            },
            h,
            false,
        )
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_half_line(&self) -> bool {
        self.half_line
    }

    /// Abscissae and weights after mapping `x = origin + scale·y`.
    pub fn mapped(&self, origin: f64, scale: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes
            .iter()
            .map(move |&(y, w)| (origin + scale * y, scale * w))
    }
}
