//! Error type shared across the crate.

/// Errors reported by problem construction, proximal evaluation, integration
/// and trajectory analysis.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("step size eta must be positive and finite, got {0}")]
    NonPositiveEta(f64),
    #[error("Lipschitz constant beta must be nonnegative and finite, got {0}")]
    InvalidBeta(f64),
    #[error("step condition eta*beta*(3 + eta*beta) < 1 violated: eta = {eta}, beta = {beta} gives {value}")]
    StepCondition { eta: f64, beta: f64, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid box bounds at component {index}: lo = {lo} > hi = {hi}")]
    InvalidBox { index: usize, lo: f64, hi: f64 },
    #[error("matrix is not symmetric at ({i}, {j}): {aij} vs {aji}")]
    AsymmetricMatrix {
        i: usize,
        j: usize,
        aij: f64,
        aji: f64,
    },
    #[error("matrix is not square: row {row} has length {len}, expected {expected}")]
    NotSquare {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("proximal subproblem did not converge: last residual {residual} after {iterations} iterations")]
    ProxConvergence { residual: f64, iterations: usize },
    #[error("power iteration did not converge within {iterations} iterations")]
    PowerIteration { iterations: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid integrator config: {0}")]
    InvalidConfig(String),
    #[error("non-finite state encountered at t = {t}; under the step condition this indicates a bug or a mis-declared beta")]
    Divergence { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("grid point {t} outside trajectory range [0, {t_end}]")]
    GridOutOfRange { t: f64, t_end: f64 },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("trajectory dimension {traj_dim} does not match problem dimension {problem_dim}")]
    MismatchedTrajectory { traj_dim: usize, problem_dim: usize },
    #[error("rate fit window is degenerate: {0}")]
    DegenerateWindow(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
