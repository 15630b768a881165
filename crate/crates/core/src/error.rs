use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid maturity grid: {0}")]
    InvalidGrid(String),

    #[error("curve is not admissible: {0}")]
    NonAdmissibleCurve(String),

    #[error("tail mass {tail:.3e} beyond the grid exceeds tolerance {tolerance:.3e}")]
    TailTooFat { tail: f64, tolerance: f64 },

    #[error("density integrates to {total:.12} (tolerance {tolerance:.1e})")]
    NotNormalized { total: f64, tolerance: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("discount factors are not strictly decreasing at maturity {maturity}")]
    NonMonotoneInput { maturity: f64 },

    #[error("curve input has no (0, 1) anchor row")]
    MissingAnchor,

    #[error("densities live on different grids")]
    GridMismatch,

    #[error("quadrature failed to converge: {0}")]
    QuadratureDivergence(String),

    #[error("metric tensor is singular or not positive definite at {0:?}")]
    SingularMetric(Vec<f64>),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("path left the parameter domain at {0:?}")]
    DomainExit(Vec<f64>),

    #[error("density lost positivity: {0}")]
    PositivityLoss(String),

    #[error("state blew up: {0}")]
    BlowUp(String),

    #[error("maturity {x} outside grid [0, {x_max}]")]
    OutOfGrid { x: f64, x_max: f64 },

    #[error("negative density value {value} at node {index}")]
    NegativeDensity { index: usize, value: f64 },

    #[error("moment constraints are infeasible: {0}")]
    Infeasible(String),

    #[error("moment of order {0} does not exist")]
    MomentMissing(usize),

    #[error("short rate must be positive")]
    ZeroShortRate,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("path {path}, step {step}: {source}")]
    Simulation {
        path: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Input errors (malformed files, inadmissible curves) as opposed to
    /// numerical failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::NonMonotoneInput { .. }
                | Error::MissingAnchor
                | Error::NonAdmissibleCurve(_)
                | Error::TailTooFat { .. }
                | Error::NotNormalized { .. }
                | Error::InvalidParams(_)
                | Error::InvalidGrid(_)
                | Error::InvalidConfig(_)
                | Error::GridMismatch
                | Error::OutOfGrid { .. }
                | Error::NegativeDensity { .. }
                | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
