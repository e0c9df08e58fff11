use std::fmt;

use thiserror::Error;

/// One failed channel condition, e.g. `N2 ⪯ N3 fails, min-eig(N3−N2) = -0.3`.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fails, {}", self.condition, self.detail)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("matrix is indefinite (min eigenvalue {min_eig:e})")]
    Indefinite { min_eig: f64 },

    #[error("invalid channel: {}", join(.0))]
    InvalidChannel(Vec<Violation>),

    #[error("power split is infeasible for this channel")]
    InfeasibleSplit,

    #[error("feasibility projection did not converge (last gap {gap:e})")]
    ProjectionFailed { gap: f64 },

    #[error("weight mu = {0} outside the supported range")]
    MuOutOfDomain(f64),

    #[error("determinant {det:e} of {which} is negative; entropy-power expression leaves the real branch")]
    ComplexBranch { which: &'static str, det: f64 },

    #[error("oracle domain: {0}")]
    OracleDomain(String),

    #[error("solver invariant violated: {0}")]
    Internal(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
