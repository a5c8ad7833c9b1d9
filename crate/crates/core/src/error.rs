use thiserror::Error;

/// Errors raised by the samplers, estimators and the experiment harness.
#[derive(Debug, Error)]
pub enum GmcError {
    #[error("covariance diverges at gap {gap} (multiple of 2π)")]
    Singularity { gap: f64 },

    #[error("{modes} modes alias on a grid of {points} points (need modes ≤ points/2)")]
    Aliasing { modes: usize, points: usize },

    #[error("frequency {n_max} exceeds the Nyquist limit of a {points}-point grid")]
    Nyquist { n_max: usize, points: usize },

    #[error("gamma = {gamma} is not subcritical (must be < √2)")]
    Supercritical { gamma: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parameter out of the supported regime: {0}")]
    Regime(String),

    #[error("scale ordering violated: t = {t} must be < T = {fine}")]
    Ordering { t: f64, fine: f64 },

    #[error("covariance kernel is not embeddable: negative spectral mass {negative_mass:e} (relative {relative:e})")]
    Embedding { negative_mass: f64, relative: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("malformed results file at line {line}: {message}")]
    Malformed { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl GmcError {
    /// Process exit code used by the CLI: 2 for configuration problems, 3 for
    /// numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            GmcError::Config(_) | GmcError::Parse { .. } => 2,
            GmcError::Numeric(_) | GmcError::Embedding { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, GmcError>;
