//! Training-set balancing and query selection.

mod balance;
mod query;

pub use balance::{balance, dynamic_resample_share, BalanceKind, BalanceSpec};
pub use query::{rank_pool, select_next, QueryKind, QuerySpec, Selection};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum StrategyError {
    #[error("balancing needs at least one relevant and one irrelevant label")]
    MissingClass,
    #[error("every record is already labeled")]
    PoolExhausted,
    #[error("labeled ids and labels differ in length")]
    LengthMismatch,
    #[error("invalid strategy settings: {0}")]
    InvalidSpec(String),
}
