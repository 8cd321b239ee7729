//! Actor identity, shard mapping, table layout and record encodings.

pub mod codec;
mod envelope;
mod ids;
mod records;
mod schemas;

pub use envelope::{
    compose_timestamp, next_timestamp, parse_sort_key, sort_key, timestamp_millis,
    MessageEnvelope, SenderId, EXTERNAL_SENDER, SEQUENCE_BITS,
};
pub use ids::{assign_shard, ActorId, ShardPolicies, ShardPolicy, ShardRef, SEPARATOR};
pub use records::{
    collection_id, ActorStateRecord, ActorTaskRecord, CollectionItemRecord, DeadLetterRecord,
    OutboxRecord, WorkerLeaseRecord, ATTR_PREFIX, NO_WORKER,
};
pub use schemas::{collection_table, create_tables, schemas, tables, CollectionDecl};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed id: {0}")]
    MalformedId(String),
    #[error("codec error: {0}")]
    Codec(String),
    #[error("{table} record lacks attribute {attribute}")]
    MissingAttribute { table: String, attribute: String },
    #[error("corrupt record: {0}")]
    Corrupt(String),
}

fn require<T>(v: Option<T>, table: &str, attribute: &str) -> Result<T, ModelError> {
    v.ok_or_else(|| ModelError::MissingAttribute {
        table: table.to_string(),
        attribute: attribute.to_string(),
    })
}
