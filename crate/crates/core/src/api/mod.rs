//! Developer-facing programming model.
//!
//! Actors are plain serializable structs. A handler receives the message and a
//! [`Context`] through which it reaches the features its type declared:
//! sending, spawning and queryable collections. Nothing a handler does touches
//! storage directly; effects are buffered into a [`SideEffectSet`] that the
//! worker commits in one transaction.

mod cache;
mod context;
mod registry;
mod slot;

pub use cache::CollectionCache;
pub use context::{
    Collection, Context, ExternalSend, ItemDelete, ItemWrite, MessageSender, Outgoing,
    SideEffectSet, Spawn, Spawner,
};
pub use registry::{ActorTypeInfo, CollectionFeature, DynActor, FeatureSet, Registry};
pub use slot::{ActorSlot, ProcessingEnv};

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::model::{codec, MessageEnvelope, ModelError};
use crate::txkv::KvError;

/// Behavior of one actor type. The struct itself is the persisted state.
pub trait Actor: Serialize + DeserializeOwned + Send + 'static {
    /// Stable tag under which the state is stored.
    const TYPE_TAG: &'static str;

    fn features() -> FeatureSet {
        FeatureSet::none()
    }

    fn receive(&mut self, msg: &MessageEnvelope, cx: &mut Context<'_>) -> Result<(), ActorError>;
}

pub trait MessageType: Serialize + DeserializeOwned + Send + 'static {
    const TYPE_TAG: &'static str;
}

/// Element type of a queryable collection.
pub trait QueryableItem: Serialize + DeserializeOwned + Clone + Send + 'static {
    const TYPE_TAG: &'static str;
    /// Attribute names `find` accepts.
    const QUERYABLE: &'static [&'static str];

    fn item_id(&self) -> String;

    /// Current values of the queryable attributes.
    fn attributes(&self) -> BTreeMap<String, String>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ActorError {
    #[error("{0}")]
    Application(String),
    #[error("feature {0} is not declared by this actor type")]
    FeatureNotBound(String),
    #[error("message type {0} is not registered")]
    UnregisteredMessageType(String),
    #[error("actor type {0} is not registered")]
    UnknownActorType(String),
    #[error("item {item_id} not found in {collection}")]
    ItemNotFound { collection: String, item_id: String },
    #[error("attribute {0} is not queryable")]
    UnknownQueryableAttribute(String),
    #[error("collection {field} holds {declared}, not {requested}")]
    WrongItemType {
        field: String,
        declared: String,
        requested: String,
    },
    #[error("actor {0} spawned twice in one call")]
    DuplicateSpawn(String),
    #[error("storage: {0}")]
    Storage(#[from] KvError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ActorError {
    pub fn app(msg: impl Into<String>) -> Self {
        ActorError::Application(msg.into())
    }

    pub fn is_transient(&self) -> bool {
        matches!(self, ActorError::Storage(e) if e.is_transient())
    }
}

impl MessageEnvelope {
    pub fn is<M: MessageType>(&self) -> bool {
        self.type_tag == M::TYPE_TAG
    }

    pub fn decode<M: MessageType>(&self) -> Result<M, ActorError> {
        if !self.is::<M>() {
            return Err(ActorError::app(format!(
                "expected {} but got {}",
                M::TYPE_TAG,
                self.type_tag
            )));
        }
        Ok(codec::decode(&self.payload)?)
    }
}
