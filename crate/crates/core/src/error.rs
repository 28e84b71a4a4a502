use thiserror::Error;

use crate::partition::EventId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid market spec: {0}")]
    InvalidSpec(String),
    #[error("time index out of range: {0}")]
    IndexRange(String),
    #[error("trader model cannot calibrate at k={k}: regime is extreme")]
    CalibrationBreak { k: usize },
    #[error("negative calibrated intensity {value:e} at k={k}, l={l}")]
    NegativeIntensity { k: usize, l: usize, value: f64 },
    #[error("trader surface at k={k} is zero at l={zero_at} but positive at l={positive_at}")]
    MonotoneZeroViolation {
        k: usize,
        zero_at: usize,
        positive_at: usize,
    },
    #[error("hedge ratio at k={k}, maturity {ell} divides by a zero price")]
    DegenerateRatio { k: usize, ell: usize },
    #[error("regime of {event} undefined at k={k}")]
    RegimeUndefined { event: EventId, k: usize },
    #[error("fair value from the normal regime is not identically zero (max {max_value:e})")]
    NormalValueNotFlat { max_value: f64 },
    #[error("atom map has {got} values, partition has {expected} atoms")]
    IncompleteAtomMap { expected: usize, got: usize },
    #[error("{event} requested at k={k}, past its exit time {tau_e}")]
    PastExit {
        event: EventId,
        k: usize,
        tau_e: usize,
    },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("path enumeration capped at horizon {cap}, got {horizon}")]
    PathCap { horizon: usize, cap: usize },
    #[error("not applicable: {0}")]
    NotApplicable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
