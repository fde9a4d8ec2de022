use std::path::PathBuf;

/// Errors produced by the policy, simulator, analysis and harness layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("stale feedback for task {task_id}: receipt slot {receipt_slot} is not in ({now}, {next}]", next = now + 1)]
    StaleFeedback {
        task_id: u64,
        receipt_slot: u64,
        now: u64,
    },

    #[error("slot {slot} is past the horizon {horizon}")]
    HorizonExceeded { slot: u64, horizon: u64 },

    #[error("gamma {gamma} is infeasible for tau_max {tau_max}")]
    InfeasibleGamma { gamma: f64, tau_max: u32 },

    #[error("mismatched config: {0}")]
    MismatchedConfig(String),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
