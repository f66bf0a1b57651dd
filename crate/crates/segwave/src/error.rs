//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by segmentation, testing and simulation operations.
#[derive(Debug, Error)]
pub enum SegError {
    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A segment with zero energy cannot support a variance estimate.
    #[error("degenerate segment: {0}")]
    DegenerateSegment(String),

    /// No admissible changepoint candidate exists on the given grid.
    #[error("no admissible changepoint candidate")]
    NoCandidate,

    /// The MCMC target returned NaN; the chain cannot continue.
    #[error("chain failure at iteration {iteration}: {reason}")]
    ChainFailure { iteration: usize, reason: String },

    /// Refusal guard for operations with an intentional size cap.
    #[error("input too large: {0}")]
    TooLarge(String),

    /// Hyperparameter selection could not identify a usable value.
    #[error("no selection possible: {0}")]
    NoSelection(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// WAV container parsing failure (carries a byte offset).
    #[error(transparent)]
    Wav(#[from] crate::wav::WavError),
}

pub type Result<T> = std::result::Result<T, SegError>;
