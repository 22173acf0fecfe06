//! Error type shared by all simulator modules.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duration must be positive, got {0} ns")]
    NonPositiveDuration(f64),

    #[error(
        "sample spacing {dt_ns} ns is too coarse for coherence time {tau_c_ns} ns \
         (maximum allowed {max_dt_ns} ns)"
    )]
    CoarseSampling {
        dt_ns: f64,
        tau_c_ns: f64,
        max_dt_ns: f64,
    },

    #[error("mean field amplitude is zero; nothing to generate")]
    ZeroAmplitude,

    #[error("invalid laser parameters: {0}")]
    InvalidLaser(String),

    #[error("trace too short: {0}")]
    TraceTooShort(String),

    #[error("sample spacings differ: {a_dt_ns} ns vs {b_dt_ns} ns")]
    MismatchedSampling { a_dt_ns: f64, b_dt_ns: f64 },

    #[error("input traces are misaligned: {0}")]
    MisalignedTraces(String),

    #[error("stage delay {delay_ns} ns exceeds trace length {trace_ns} ns")]
    DelayExceedsTrace { delay_ns: f64, trace_ns: f64 },

    #[error("polarization rotation is not unitary (defect {defect:.3e})")]
    NonUnitaryRotation { defect: f64 },

    #[error("invalid stage: {0}")]
    InvalidStage(String),

    #[error("invalid detector parameters: {0}")]
    InvalidDetector(String),

    #[error(
        "thinning precondition violated: per-sample detection probability reached {p:.4}; \
         lower mean_rate_hz or use a finer dt"
    )]
    ThinningViolation { p: f64 },

    #[error("timestamps not sorted ascending at event index {0}")]
    UnsortedTimestamps(usize),

    #[error("correlation lag {lag_ns} ns too large for trace of {trace_ns} ns")]
    LagTooLarge { lag_ns: f64, trace_ns: f64 },

    #[error("invalid binning: {0}")]
    InvalidBinning(String),

    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("subset-sum enumeration is capped at 24 stages, got {0}")]
    TooManyStages(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach a path to an I/O error for explicit messages.
    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs or configuration rather than by
    /// the runtime environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::File { .. } | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
