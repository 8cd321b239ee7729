//! Worker runtime: shard ownership, polling, processing and passivation.

mod commit;
mod config;
mod events;
mod gate;
mod mailbox;
mod process;
pub mod protocol;
mod runtime;

pub use commit::{
    build_commit_plan, build_dead_letter_plan, build_inject_plan, consume_envelope,
    fencing_condition, task_upsert, ActionKind, CommitPlan, Fence,
};
pub use config::WorkerConfig;
pub use events::{Event, EventKind, EventLog};
pub use gate::{Gate, GatedStore};
pub use mailbox::Mailbox;
pub use process::{Processed, Processor, REASON_TOO_LARGE, REASON_UNKNOWN_ACTOR};
pub use runtime::{Hooks, Worker};

use std::sync::Arc;

use thiserror::Error;

use crate::api::{Actor, ActorError, QueryableItem, Registry};
use crate::model::{
    codec, collection_id, collection_table, create_tables, tables, ActorId, ActorStateRecord,
    CollectionItemRecord, ModelError, ShardPolicies,
};
use crate::txkv::{Condition, KvError, Store, WriteAction};

#[derive(Debug, Error)]
pub enum WorkerError {
    #[error("worker was killed")]
    Killed,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] KvError),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl WorkerError {
    pub fn is_transient(&self) -> bool {
        match self {
            WorkerError::Store(e) => e.is_transient(),
            WorkerError::Actor(e) => e.is_transient(),
            _ => false,
        }
    }
}

/// Everything workers of one deployment share.
#[derive(Clone)]
pub struct Runtime {
    pub store: Arc<Store>,
    pub registry: Arc<Registry>,
    pub policies: Arc<ShardPolicies>,
    pub events: EventLog,
}

impl Runtime {
    /// Creates the system tables and one table per declared collection.
    pub fn new(store: Store, registry: Registry, policies: ShardPolicies) -> Result<Runtime, KvError> {
        create_tables(&store, &registry.collections())?;
        Ok(Runtime {
            store: Arc::new(store),
            registry: Arc::new(registry),
            policies: Arc::new(policies),
            events: EventLog::new(),
        })
    }

    /// Stores the initial state of a new actor. Fails if the id is taken.
    pub fn create_actor<A: Actor>(&self, partition: &str, instance: &str, actor: &A) -> Result<ActorId, WorkerError> {
        let id = ActorId::assign(partition, instance, self.policies.for_partition(partition))?;
        let rec = ActorStateRecord {
            actor_id: id.clone(),
            type_tag: A::TYPE_TAG.to_string(),
            current_state: codec::encode(actor)?,
            last_send_ts: 0,
        };
        self.store
            .write(WriteAction::put(tables::ACTOR_STATE, rec.to_item()).when(Condition::NotExists))?;
        Ok(id)
    }

    /// Stores an item of `owner`'s collection `field` before the run.
    pub fn put_item<A: Actor, I: QueryableItem>(&self, owner: &ActorId, field: &str, item: &I) -> Result<(), WorkerError> {
        let rec = CollectionItemRecord {
            collection_id: collection_id(owner, field),
            item_id: item.item_id(),
            payload: codec::encode(item)?,
            queryable_attributes: item.attributes(),
        };
        self.store
            .write(WriteAction::put(&collection_table(A::TYPE_TAG, field), rec.to_item()))?;
        Ok(())
    }
}
