use thiserror::Error;

/// Errors raised by the linear-algebra kernels, solvers and the reduction driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {left:?} vs {right:?} ({context})")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
        context: &'static str,
    },

    #[error("QR deflation: column {column} is numerically dependent on the preceding columns")]
    Deflation { column: usize },

    #[error("matrix not SPD: non-positive pivot {value:e} at index {pivot}")]
    NotSpd { pivot: usize, value: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eigenvalue iteration did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("operator not SPD: p^T A p = {curvature:e} at iteration {iteration}")]
    OperatorNotSpd { iteration: usize, curvature: f64 },

    #[error("recycle space rank-deficient ({0}); drop dependent columns before building it")]
    RecycleRankDeficient(String),

    #[error("incomplete Cholesky broke down at row {row} after {retries} diagonal-shift retries; try a larger diagonal shift")]
    IncompleteCholeskyBreakdown { row: usize, retries: usize },

    #[error("preconditioner is not positive definite (x^T P x = {value:e})")]
    PreconditionerNotSpd { value: f64 },

    #[error("linear solve at shift {shift} did not converge: relative residual {relative_residual:e} after {iterations} iterations")]
    SolverNotConverged {
        shift: f64,
        iterations: usize,
        relative_residual: f64,
    },

    #[error("Arnoldi breakdown: candidate block norm {norm:e} at inner step {step}")]
    Breakdown { step: usize, norm: f64 },

    #[error("stacked solutions rank-deficient; perturbation undefined")]
    StackRankDeficient,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dims(left: (usize, usize), right: (usize, usize), context: &'static str) -> Self {
        Error::DimensionMismatch {
            left,
            right,
            context,
        }
    }
}
