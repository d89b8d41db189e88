//! Error type shared by every module.

use thiserror::Error;

/// Errors raised by solvers, validators and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed configuration; `path` names the offending field.
    #[error("configuration error at `{path}`: {msg}")]
    Config { path: String, msg: String },
    /// Operator evaluation produced a non-finite value or is ill-defined.
    #[error("operator definition error: {0}")]
    OperatorDefinition(String),
    /// Time step exceeds the monotonicity bound.
    #[error("CFL violation: step {step:e} exceeds bound {bound:e}")]
    Cfl { step: f64, bound: f64 },
    /// A trajectory produced non-finite values.
    #[error("divergence at fast time {s:e}: {msg}")]
    Divergence { s: f64, msg: String },
    /// Iterative solver did not converge.
    #[error("solver error in {phase}: {msg}")]
    Solver { phase: String, msg: String },
    /// Two independent computations disagree beyond tolerance.
    #[error("consistency error: {0}")]
    Consistency(String),
    /// Numerical tolerance check failed (asymmetry, underflow).
    #[error("tolerance error: {0}")]
    Tolerance(String),
    /// Query outside a tabulated range.
    #[error("range error: {0}")]
    Range(String),
    /// Prerequisite hierarchy level missing.
    #[error("sequencing error: {0}")]
    Sequencing(String),
    /// Requested work exceeds the configured budget.
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config { path: path.into(), msg: msg.into() }
    }

    pub fn solver(phase: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Solver { phase: phase.into(), msg: msg.into() }
    }

    /// Process exit code for the command-line surface.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Cfl { .. } | Error::Json(_) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
