use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis of {count} states exceeds the configured cap of {cap}")]
    BasisTooLarge { count: usize, cap: usize },

    #[error("parity sector {0} contains no states")]
    EmptySector(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("initial state has weight {weight:.3e} in the requested parity sector")]
    SectorWeight { weight: f64 },

    #[error("operator is not Hermitian: imaginary residue {0:.3e}")]
    NonHermitian(f64),

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    #[error("no energy transfer within horizon {horizon:.4} (max stored work {max_work:.3e})")]
    NoTransfer { horizon: f64, max_work: f64 },

    #[error("no sign change of the detuning in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("no resonance in window [{lo}, {hi}]: best transfer ratio {best_ratio:.4}")]
    NoResonance { lo: f64, hi: f64, best_ratio: f64 },

    #[error("unsupported excitation n = {0}")]
    UnsupportedExcitation(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors that indicate the numerics (truncation, eigensolver) broke down
    /// rather than a bad request.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalBreakdown(_)
                | Error::Lapack { .. }
                | Error::NonHermitian(_)
                | Error::SectorWeight { .. }
        )
    }
}
