use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("statistics poisoning: non-finite value target {0}")]
    NonFiniteTarget(f64),
    #[error("cannot update statistics from an empty target sequence")]
    EmptyTargets,
    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite importance ratio at index {0}")]
    NonFiniteRatio(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("task id {task} out of range for {tasks} tasks")]
    TaskOutOfRange { task: usize, tasks: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite gradient, optimizer step rejected")]
    NonFiniteGradient,
    #[error("invalid action {0}, expected 0..4")]
    InvalidAction(usize),
    #[error("episode already terminated, call reset first")]
    EpisodeTerminated,
    #[error("undefined normalization: optimal and random references are equal ({0})")]
    UndefinedNormalization(f64),
    #[error("population of {0} members, need at least 2")]
    PopulationTooSmall(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
