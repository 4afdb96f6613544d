use thiserror::Error;

/// Errors raised by the DLCQ toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("resource limit: basis dimension {dim} exceeds cap {cap}")]
    ResourceLimit { dim: usize, cap: usize },

    #[error("eigen-solver did not converge: best residual {best_residual:e} after {iterations} iterations")]
    Convergence {
        best_residual: f64,
        iterations: usize,
    },

    #[error("infeasible renormalization seed: m_B^2 = {seed_mb2} <= 0 (try a larger cutoff or a smaller coupling)")]
    InfeasibleSeed { seed_mb2: f64 },

    #[error("renormalization did not converge after {sweeps} sweeps: {reason}")]
    RenormalizationFailed {
        sweeps: usize,
        reason: String,
        trace: Vec<crate::spectrum::RenormStep>,
    },

    #[error("degenerate truncation: kept probability {kept:e} below 1e-6")]
    DegenerateTruncation { kept: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag, used in the CLI's JSON error payload.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Parse { .. } => "parse",
            Error::ResourceLimit { .. } => "resource-limit",
            Error::Convergence { .. } => "convergence",
            Error::InfeasibleSeed { .. } => "infeasible-seed",
            Error::RenormalizationFailed { .. } => "renormalization-failed",
            Error::DegenerateTruncation { .. } => "degenerate-truncation",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
