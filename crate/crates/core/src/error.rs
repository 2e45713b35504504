//! Error type shared across the simulator.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pilot overhead infeasible: {n_sns} SNs x {pilot_len} symbols need {needed_s} s of a {slot_s} s slot")]
    InfeasiblePilot {
        n_sns: usize,
        pilot_len: u32,
        needed_s: f64,
        slot_s: f64,
    },

    #[error("SN {sn} has a zero-rate link; transmission time would be unbounded")]
    ZeroRateLink { sn: usize },

    #[error("deadline infeasible: {0}")]
    DeadlineInfeasible(String),

    #[error("no relay available for SN {sn}")]
    EmptyRelaySet { sn: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("problem has {dims} transmitters; brute-force grid supports at most {max}")]
    DimensionTooLarge { dims: usize, max: usize },

    #[error("no feasible point found")]
    NoFeasiblePoint,

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("empty result table for {0}")]
    EmptyTable(String),

    #[error("unknown scheme: {0}")]
    UnknownScheme(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
