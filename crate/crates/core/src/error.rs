use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or integrator/grid settings.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A closed-form denominator vanishes for these parameters.
    #[error("singular parameter combination: {0}")]
    Singular(String),

    /// The discriminant γ₂² − 4ω_R² vanishes; individual closed-form
    /// coefficients diverge and the limit path has to be used.
    #[error("degenerate discriminant (γ₂ = 2ω_R): {0}")]
    Degenerate(String),

    /// Requested time lies beyond the first-scattering truncation.
    #[error("t = {t} lies outside the validity window [0, {limit})")]
    OutOfWindow { t: f64, limit: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("state dimension mismatch: expected {expected} modes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered at t = {0}")]
    NonFinite(f64),

    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("moment integral diverges: {0}")]
    Divergent(String),

    #[error("extrapolation did not converge: {0}")]
    NonConvergent(String),

    #[error("envelope not resolved by the FFT grid: {0}")]
    Aliasing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::OutOfWindow { .. }
            | Error::IndexOutOfRange(_)
            | Error::DimensionMismatch { .. }
            | Error::Aliasing(_) => 2,
            Error::Io(_) => 3,
            Error::Singular(_)
            | Error::Degenerate(_)
            | Error::NonFinite(_)
            | Error::IllConditioned(_)
            | Error::Divergent(_)
            | Error::NonConvergent(_) => 4,
        }
    }
}
