use clap::ValueEnum;
use serde::Serialize;
use termgeom::curve::Tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceProfile {
    Strict,
    Standard,
    Loose,
}

/// Every tolerance a run depends on, echoed into the manifest.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResolvedTolerances {
    pub profile: ToleranceProfile,
    pub curve: Tolerances,
    /// Geodesic endpoint tolerance.
    pub geodesic: f64,
    /// Largest per-step moment residual accepted by `validate`.
    pub moment_residual: f64,
}

impl ResolvedTolerances {
    pub fn new(profile: ToleranceProfile, norm_tol: Option<f64>, tail_tol: Option<f64>) -> Self {
        let (closed, grid, tail, geodesic, moment_residual) = match profile {
            ToleranceProfile::Strict => (1e-10, 1e-6, 1e-6, 1e-12, 1e-5),
            ToleranceProfile::Standard => (1e-8, 1e-4, 1e-4, 1e-10, 1e-4),
            ToleranceProfile::Loose => (1e-6, 1e-3, 1e-3, 1e-8, 1e-3),
        };
        Self {
            profile,
            curve: Tolerances {
                closed_form_norm: closed,
                grid_norm: norm_tol.unwrap_or(grid),
                tail: tail_tol.unwrap_or(tail),
            },
            geodesic,
            moment_residual,
        }
    }
}
