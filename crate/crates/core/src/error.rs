use thiserror::Error;

/// Errors raised by the library.
///
/// Budget exhaustion is deliberately a separate type ([`crate::ledger::BudgetExhausted`]):
/// it is a stop signal for refinement loops, not a failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
    #[error("rank mismatch: input has rank {input}, block has rank {block}")]
    RankMismatch { input: usize, block: usize },
    #[error("block entries must be >= 1")]
    ZeroBlock,
    #[error("coalition width {got} does not match atom count {expected}")]
    Width { expected: usize, got: usize },
    #[error("invalid probability vector: {0}")]
    Probability(String),
    #[error("invalid top-k: k = {k} with {classes} classes")]
    TopK { k: usize, classes: usize },
    #[error("unknown victim kind `{0}`")]
    UnknownVictim(String),
    #[error("invalid victim parameters: {0}")]
    Victim(String),
    #[error("too many players for exhaustive enumeration: {players} > {limit}")]
    TooManyPlayers { players: usize, limit: usize },
    #[error("invalid partition: {0}")]
    Partition(String),
    #[error("max_evals must be at least 2, got {0}")]
    BudgetTooSmall(u64),
    #[error("query budget exhausted")]
    Exhausted,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("non-finite gradient during training: {0}")]
    Diverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<crate::ledger::BudgetExhausted> for Error {
    fn from(_: crate::ledger::BudgetExhausted) -> Self {
        Error::Exhausted
    }
}
