use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no events in sample")]
    NoEvents,
    #[error("linear predictor {eta} exceeds the exp overflow guard (|eta| > 700)")]
    Overflow { eta: f64 },
    #[error("non-identifiable: information matrix is singular")]
    NonIdentifiable,
    #[error("matrix is singular (pivot {pivot} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for {len} units")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{stage} fit did not converge after {iterations} iterations")]
    NotConverged {
        stage: FitStage,
        iterations: usize,
        beta: alloc::vec::Vec<f64>,
    },
    #[error("{stage} fit failed: {source}")]
    Stage {
        stage: FitStage,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("bisection bracket failure: {0}")]
    Bracket(String),
}

/// Which stage of the two-step site procedure failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitStage {
    Pilot,
    Probabilities,
    Main,
}

impl core::fmt::Display for FitStage {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            FitStage::Pilot => "pilot",
            FitStage::Probabilities => "sampling-probability",
            FitStage::Main => "main",
        })
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn at_stage(self, stage: FitStage) -> Self {
        match self {
            Error::NotConverged { iterations, beta, .. } => Error::NotConverged {
                stage,
                iterations,
                beta,
            },
            other => Error::Stage {
                stage,
                source: alloc::boxed::Box::new(other),
            },
        }
    }
}
