use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::linalg::LinalgError;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("triangle {triangle} is clockwise or degenerate (signed area {area:e})")]
    Orientation { triangle: usize, area: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("no quadrature rule of exactness {0} (supported: 1..=20)")]
    UnsupportedQuadrature(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("source term is negative ({value:e}) at ({x}, {y}); the problem is not degenerate elliptic")]
    NegativeSource { x: f64, y: f64, value: f64 },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("projection failed in the {block} block: {source}")]
    Projection {
        block: &'static str,
        source: LinalgError,
    },

    #[error("step {step}: linear solve failed ({source}); min eigenvalue {min_eig:e}, min laplacian {min_lap:e}")]
    StepFailed {
        step: usize,
        source: LinalgError,
        min_eig: f64,
        min_lap: f64,
    },

    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error("no convergence after {iterations} iterations (residual {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },

    #[error("divergence detected at step {step}: residual {residual:e} exceeds 1e3 x minimum {minimum:e}")]
    DivergenceDetected {
        step: usize,
        residual: f64,
        minimum: f64,
        history: Vec<f64>,
    },

    #[error("finite-difference solver: {0}")]
    FiniteDifference(String),
}
