//! Crate-wide error type, grouped into the categories the CLI maps to
//! distinct exit codes: configuration, data, numerical and dependency.

use thiserror::Error;

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numerical,
    Dependency,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Numerical => 4,
            ErrorCategory::Dependency => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("split ratios sum to {sum}, expected 1 within 1e-9")]
    RatioSum { sum: f64 },

    #[error("scenario `{id}` has {len} frames, needs at least {needed}")]
    ScenarioTooShort { id: String, len: usize, needed: usize },

    #[error("scenario `{id}` invalid: {reason}")]
    InvalidScenario { id: String, reason: String },

    #[error("misaligned {what}: {left} vs {right}")]
    Misaligned { what: String, left: usize, right: usize },

    #[error("{what} not found")]
    Lookup { what: String },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("standstill: |v_x| = {v:.3} m/s, sideslip undefined at rest")]
    Standstill { v: f64 },

    #[error("steering domain: |theta_A| = {theta:.3} rad >= pi/2")]
    SteeringDomain { theta: f64 },

    #[error("simulation unstable at step {step}: |beta| = {beta:.3} rad")]
    SimulationUnstable { step: usize, beta: f64 },

    #[error("innovation covariance singular (condition number {cond:.3e})")]
    SingularInnovation { cond: f64 },

    #[error("non-finite activation in `{layer}`")]
    NonFiniteActivation { layer: String },

    #[error("training diverged at epoch {epoch}: loss {loss:.4e} vs initial {initial:.4e}")]
    TrainingDiverged { epoch: usize, loss: f64, initial: f64 },

    #[error("{what} must be fitted before use")]
    NotFitted { what: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("stage `{stage}` needs missing artifact {path}; run the producing stage first")]
    MissingArtifact { stage: String, path: String },

    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::RatioSum { .. } => ErrorCategory::Config,
            Error::ScenarioTooShort { .. }
            | Error::InvalidScenario { .. }
            | Error::Misaligned { .. }
            | Error::Lookup { .. }
            | Error::Degenerate(_)
            | Error::Io { .. }
            | Error::Parse { .. } => ErrorCategory::Data,
            Error::Standstill { .. }
            | Error::SteeringDomain { .. }
            | Error::SimulationUnstable { .. }
            | Error::SingularInnovation { .. }
            | Error::NonFiniteActivation { .. }
            | Error::TrainingDiverged { .. }
            | Error::NotFitted { .. }
            | Error::Numerical(_) => ErrorCategory::Numerical,
            Error::MissingArtifact { .. } => ErrorCategory::Dependency,
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
