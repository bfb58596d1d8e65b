use crate::petrinet::TransitionId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid range: lo {lo} > hi {hi}")]
    InvalidRange { lo: i64, hi: i64 },

    #[error("invalid generator seed {0}: must lie in [1, 2^31 - 2]")]
    InvalidSeed(i64),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("dimension mismatch at line {line}: expected {expected} values, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("machine index {machine} out of range for {machines} machines (line {line})")]
    MachineOutOfRange {
        line: usize,
        machine: i64,
        machines: usize,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("capacity {capacity} is smaller than the number of jobs {jobs}")]
    CapacityTooSmall { capacity: usize, jobs: usize },

    #[error("unknown transition {0:?}")]
    UnknownTransition(TransitionId),

    #[error("transition {0:?} is not enabled")]
    GuardViolation(TransitionId),

    #[error("action {0} is masked out")]
    MaskedAction(usize),

    #[error("environment already terminated")]
    Terminated,

    #[error("index out of range: {0}")]
    BadIndex(String),

    #[error("environment has not terminated")]
    NotTerminated,

    #[error("action mask has no enabled entry")]
    EmptyMask,

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("empty trajectory")]
    EmptyTrajectory,

    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    #[error("baseline makespan must be positive")]
    ZeroBaseline,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
