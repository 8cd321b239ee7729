use std::collections::{BTreeMap, BTreeSet};

use super::{Actor, ActorError, MessageType, QueryableItem};
use crate::model::{codec, CollectionDecl, ModelError};

/// One declared collection field of an actor type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionFeature {
    pub field: String,
    pub item_type: &'static str,
    pub attributes: Vec<String>,
}

/// Features an actor type asks to have bound before each message.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FeatureSet {
    pub sender: bool,
    pub spawner: bool,
    pub collections: Vec<CollectionFeature>,
}

impl FeatureSet {
    pub fn none() -> Self {
        FeatureSet::default()
    }

    pub fn sender(mut self) -> Self {
        self.sender = true;
        self
    }

    pub fn spawner(mut self) -> Self {
        self.spawner = true;
        self
    }

    pub fn collection<I: QueryableItem>(mut self, field: &str) -> Self {
        self.collections.push(CollectionFeature {
            field: field.to_string(),
            item_type: I::TYPE_TAG,
            attributes: I::QUERYABLE.iter().map(|s| s.to_string()).collect(),
        });
        self
    }

    pub fn collection_feature(&self, field: &str) -> Option<&CollectionFeature> {
        self.collections.iter().find(|c| c.field == field)
    }
}

pub(crate) type DecodeFn = fn(&[u8]) -> Result<Box<dyn DynActor>, ModelError>;

pub struct ActorTypeInfo {
    pub type_tag: &'static str,
    pub features: FeatureSet,
    decode: DecodeFn,
}

impl ActorTypeInfo {
    pub fn decode(&self, state: &[u8]) -> Result<Box<dyn DynActor>, ModelError> {
        (self.decode)(state)
    }

    pub(crate) fn decode_fn(&self) -> DecodeFn {
        self.decode
    }
}

/// Object-safe view of an [`Actor`].
pub trait DynActor: Send {
    fn type_tag(&self) -> &'static str;
    fn receive_dyn(
        &mut self,
        msg: &crate::model::MessageEnvelope,
        cx: &mut super::Context<'_>,
    ) -> Result<(), ActorError>;
    fn encode_state(&self) -> Result<Vec<u8>, ModelError>;
}

impl<A: Actor> DynActor for A {
    fn type_tag(&self) -> &'static str {
        A::TYPE_TAG
    }

    fn receive_dyn(
        &mut self,
        msg: &crate::model::MessageEnvelope,
        cx: &mut super::Context<'_>,
    ) -> Result<(), ActorError> {
        self.receive(msg, cx)
    }

    fn encode_state(&self) -> Result<Vec<u8>, ModelError> {
        codec::encode(self)
    }
}

fn decode_actor<A: Actor>(state: &[u8]) -> Result<Box<dyn DynActor>, ModelError> {
    Ok(Box::new(codec::decode::<A>(state)?))
}

/// Type tags of every actor, message and collection item the application uses.
#[derive(Default)]
pub struct Registry {
    actors: BTreeMap<&'static str, ActorTypeInfo>,
    messages: BTreeSet<&'static str>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    pub fn actor<A: Actor>(mut self) -> Self {
        self.actors.insert(
            A::TYPE_TAG,
            ActorTypeInfo {
                type_tag: A::TYPE_TAG,
                features: A::features(),
                decode: decode_actor::<A>,
            },
        );
        self
    }

    pub fn message<M: MessageType>(mut self) -> Self {
        self.messages.insert(M::TYPE_TAG);
        self
    }

    pub fn has_message(&self, tag: &str) -> bool {
        self.messages.contains(tag)
    }

    pub fn actor_type(&self, tag: &str) -> Result<&ActorTypeInfo, ActorError> {
        self.actors
            .get(tag)
            .ok_or_else(|| ActorError::UnknownActorType(tag.to_string()))
    }

    /// Declared features of `tag`, checked before each processing call.
    pub fn bind_features(&self, tag: &str) -> Result<&FeatureSet, ActorError> {
        self.actor_type(tag).map(|t| &t.features)
    }

    pub fn collections(&self) -> Vec<CollectionDecl> {
        self.actors
            .values()
            .flat_map(|t| {
                t.features.collections.iter().map(move |c| CollectionDecl {
                    actor_type: t.type_tag.to_string(),
                    field: c.field.clone(),
                    attributes: c.attributes.clone(),
                })
            })
            .collect()
    }
}
