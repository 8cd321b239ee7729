//! Embedded transactional key-value store.
//!
//! Emulates the subset of a managed NoSQL store the runtime depends on:
//! composite primary keys, strongly consistent reads, conditional single-item
//! writes, multi-item atomic write transactions, equality queries over
//! secondary indexes, and seeded fault injection.

mod action;
mod dump;
mod fault;
mod schema;
mod store;
mod value;

pub use action::{Assign, Condition, WriteAction};
pub use dump::dump;
pub use fault::{FaultDecision, FaultInjector, FaultPlan};
pub use schema::{IndexSpec, TableSchema};
pub use store::{
    AppliedWrite, CommitRecord, Query, Snapshot, Store, StoreConfig, StoreStats, TableHandle,
    WriteOp, DEFAULT_TRANSACTION_ITEM_LIMIT,
};
pub use value::{AttributeValue, Attributes, Item, ItemKey};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KvError {
    #[error("unknown table {0}")]
    UnknownTable(String),
    #[error("table {0} already exists")]
    DuplicateTable(String),
    #[error("unknown index {index} on table {table}")]
    UnknownIndex { table: String, index: String },
    #[error("condition failed at action {index}")]
    ConditionFailed { index: usize },
    #[error("transient failure")]
    TransientFailure,
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("transaction has {len} actions, limit is {limit}")]
    LimitExceeded { len: usize, limit: usize },
    #[error("action {index} targets a key already used in this transaction")]
    DuplicateKeyInTransaction { index: usize },
    #[error("empty transaction")]
    EmptyTransaction,
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("key schema mismatch: {0}")]
    KeySchema(String),
    #[error("invalid item: {0}")]
    InvalidItem(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

impl KvError {
    pub fn is_transient(&self) -> bool {
        matches!(self, KvError::TransientFailure)
    }
}
