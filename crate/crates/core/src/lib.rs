//! Interest-rate term structures as probability densities on maturity.
//!
//! A discount curve `P(T)` with `P(0) = 1` that decreases to zero is the
//! survival function of a density `ρ(T) = −P′(T)`. This crate works with
//! that density directly:
//!
//! * [`curve`]: curves, densities, the map between them, flat-rate families.
//! * [`geometry`]: square-root embedding, Bhattacharyya angle, Fisher–Rao
//!   metric and geodesics.
//! * [`dynamics`]: Monte Carlo evolution of the density under the
//!   no-arbitrage drift, with numeraire and diagnostics.
//! * [`moments`]: principal moments, entropy, maximum-entropy calibration and
//!   checks of the moment dynamics.
//! * [`sphere`]: the same dynamics for `ξ = √ρ` on the unit sphere.

pub mod curve;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod moments;
pub mod quadrature;
pub mod sphere;

pub use error::{Error, Result};
pub use grid::MaturityGrid;
