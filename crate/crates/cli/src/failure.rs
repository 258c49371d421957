//! Command failures and their process exit codes.

use std::fmt;

pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_MISSING: i32 = 4;
pub const EXIT_MALFORMED: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config values or model parameters.
    Usage(String),
    /// A linear solve, factorization or Arnoldi step failed.
    Solver(airga::Error),
    /// A required input file does not exist.
    Missing(String),
    /// An input file exists but cannot be parsed.
    Malformed(String),
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Solver(_) => EXIT_SOLVER,
            Self::Missing(_) => EXIT_MISSING,
            Self::Malformed(_) => EXIT_MALFORMED,
            Self::Other(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Usage(m) => write!(f, "usage error: {m}"),
            Self::Solver(e) => write!(f, "solver failure: {e}"),
            Self::Missing(m) => write!(f, "missing file: {m}"),
            Self::Malformed(m) => write!(f, "malformed input: {m}"),
            Self::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<airga::Error> for Failure {
    fn from(e: airga::Error) -> Self {
        use airga::Error as E;
        match e {
            E::NotSpd { .. }
            | E::Singular(_)
            | E::EigenNoConvergence { .. }
            | E::OperatorNotSpd { .. }
            | E::RecycleRankDeficient(_)
            | E::IncompleteCholeskyBreakdown { .. }
            | E::PreconditionerNotSpd { .. }
            | E::SolverNotConverged { .. }
            | E::Breakdown { .. }
            | E::Deflation { .. } => Self::Solver(e),
            E::InvalidArgument(m) => Self::Usage(m),
            E::Parse { .. } | E::DimensionMismatch { .. } => Self::Malformed(e.to_string()),
            E::Io { ref message, .. } if message.contains("No such file") => {
                Self::Missing(e.to_string())
            }
            other => Self::Other(anyhow::Error::new(other)),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Other(e)
    }
}
