use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field is identically zero")]
    ZeroField,

    #[error("non-finite or negative field value at node {index}: {value}")]
    InvalidField { index: usize, value: f64 },

    #[error("negative base {base} raised to non-integer power {theta}")]
    NegativeBase { base: f64, theta: f64 },

    #[error("potential is not normalized: |V|_q = {norm} (q = {q})")]
    Normalization { norm: f64, q: f64 },

    #[error("{what} did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("ground state of the linearized operator has non-negative eigenvalue {0} (mu <= mu_FS)")]
    Positivity(f64),

    #[error("descent fell back to the symmetric solution (asymmetry {asymmetry:e})")]
    FellBackToSymmetric { asymmetry: f64 },

    #[error("continuation step failed at kappa = {kappa} with eta = {eta}")]
    StepFailure { kappa: f64, eta: f64 },

    #[error("theta = {theta} outside [{lower}, 1]")]
    ThetaOutOfRange { theta: f64, lower: f64 },

    #[error("{} crossings found where at most one was expected", .0.len())]
    AmbiguousCrossing(Vec<crate::analysis::Crossing>),

    #[error("empty domain: {0}")]
    EmptyDomain(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("shooting bracket failure: {0}")]
    BracketFailure(String),

    #[error("tolerance not reached: {0}")]
    Tolerance(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::ThetaOutOfRange { .. } | Error::Domain(_) | Error::InvalidGrid(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
            _ => 3,
        }
    }
}
