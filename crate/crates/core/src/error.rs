use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("part index {index} out of range for a cover with {parts} parts")]
    PartOutOfRange { index: usize, parts: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid cover: {0}")]
    InvalidCover(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    /// Some overlap received no draws from one of the two chains sharing it,
    /// so the ratio of part masses cannot be formed.
    #[error("decomposition failed: overlap {overlap} has no hits from part {part}")]
    Failure { overlap: usize, part: usize },

    #[error("no point with positive density found in part {part}")]
    Initialization { part: usize },

    #[error("envelope violated at a sampled point (log ratio {log_ratio})")]
    EnvelopeViolation { log_ratio: f64 },

    #[error("rejection sampler exceeded {attempts} attempts in part {part}")]
    RejectionExhausted { part: usize, attempts: u64 },

    #[error("chain lengths differ: part {part} has {got} draws, expected {expected}")]
    LengthMismatch { part: usize, expected: usize, got: usize },

    #[error("part {part} has no draws outside its prior overlaps")]
    NoEligibleDraws { part: usize },

    #[error("selected pool is empty in part {part}")]
    EmptyPool { part: usize },

    #[error("row {row} of the transition matrix is not stochastic (sum {sum})")]
    NotStochastic { row: usize, sum: f64 },

    #[error("transition matrix is reducible")]
    Reducible,

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("state {state} out of range for {states} states")]
    StateOutOfRange { state: usize, states: usize },

    #[error("all particle weights vanished at step {step}")]
    WeightsVanished { step: usize },

    #[error("missing exact {0} for this target")]
    MissingOracle(&'static str),

    #[error("linear system is singular")]
    Singular,
}
