use std::collections::{BTreeMap, BTreeSet};
use std::marker::PhantomData;

use super::cache::{CacheEntry, CollectionCache, FieldCache};
use super::registry::FeatureSet;
use super::slot::ProcessingEnv;
use super::{Actor, ActorError, MessageType, QueryableItem};
use crate::model::{
    codec, collection_id, collection_table, ActorId, CollectionItemRecord, MessageEnvelope,
};
use crate::txkv::{Query, Store};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub receiver: ActorId,
    pub type_tag: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalSend {
    pub correlation_id: String,
    pub type_tag: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spawn {
    pub id: ActorId,
    pub type_tag: String,
    pub state: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemWrite {
    pub table: String,
    pub record: CollectionItemRecord,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemDelete {
    pub table: String,
    pub collection_id: String,
    pub item_id: String,
}

/// Everything one processing call wants to happen, committed all at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideEffectSet {
    pub actor: ActorId,
    pub type_tag: String,
    pub consumed: MessageEnvelope,
    pub new_state: Vec<u8>,
    pub outgoing: Vec<Outgoing>,
    pub external: Vec<ExternalSend>,
    pub spawns: Vec<Spawn>,
    pub item_writes: Vec<ItemWrite>,
    pub item_deletes: Vec<ItemDelete>,
}

impl SideEffectSet {
    /// Number of store actions the commit needs, fencing included.
    pub fn action_count(&self) -> usize {
        let shards: BTreeSet<_> = self.outgoing.iter().map(|o| o.receiver.shard_ref()).collect();
        let own = shards.contains(&self.actor.shard_ref());
        2 + self.outgoing.len()
            + shards.len()
            + usize::from(!own)
            + self.external.len()
            + self.spawns.len()
            + self.item_writes.len()
            + self.item_deletes.len()
    }
}

/// Processing context handed to [`Actor::receive`].
pub struct Context<'a> {
    id: &'a ActorId,
    actor_type: &'static str,
    features: &'a FeatureSet,
    env: ProcessingEnv<'a>,
    cache: &'a mut CollectionCache,
    pub(crate) outgoing: Vec<Outgoing>,
    pub(crate) external: Vec<ExternalSend>,
    pub(crate) spawns: Vec<Spawn>,
}

impl<'a> Context<'a> {
    pub(crate) fn new(
        id: &'a ActorId,
        actor_type: &'static str,
        env: ProcessingEnv<'a>,
        cache: &'a mut CollectionCache,
    ) -> Result<Self, ActorError> {
        let features = env.registry.bind_features(actor_type)?;
        Ok(Context {
            id,
            actor_type,
            features,
            env,
            cache,
            outgoing: Vec::new(),
            external: Vec::new(),
            spawns: Vec::new(),
        })
    }

    pub fn id(&self) -> &ActorId {
        self.id
    }

    pub fn sender(&mut self) -> Result<MessageSender<'_>, ActorError> {
        if !self.features.sender {
            return Err(ActorError::FeatureNotBound("sender".into()));
        }
        Ok(MessageSender {
            registry: self.env.registry,
            outgoing: &mut self.outgoing,
            external: &mut self.external,
        })
    }

    pub fn spawner(&mut self) -> Result<Spawner<'_>, ActorError> {
        if !self.features.spawner {
            return Err(ActorError::FeatureNotBound("spawner".into()));
        }
        Ok(Spawner {
            env: self.env,
            spawns: &mut self.spawns,
        })
    }

    pub fn collection<I: QueryableItem>(
        &mut self,
        field: &str,
    ) -> Result<Collection<'_, I>, ActorError> {
        let decl = self
            .features
            .collection_feature(field)
            .ok_or_else(|| ActorError::FeatureNotBound(format!("collection {field}")))?;
        if decl.item_type != I::TYPE_TAG {
            return Err(ActorError::WrongItemType {
                field: field.to_string(),
                declared: decl.item_type.to_string(),
                requested: I::TYPE_TAG.to_string(),
            });
        }
        let (id, actor_type) = (self.id, self.actor_type);
        let cache = self
            .cache
            .fields
            .entry(field.to_string())
            .or_insert_with(|| FieldCache {
                table: collection_table(actor_type, field),
                collection_id: collection_id(id, field),
                entries: BTreeMap::new(),
            });
        Ok(Collection {
            store: self.env.store,
            cache,
            _item: PhantomData,
        })
    }
}

pub struct MessageSender<'c> {
    registry: &'c super::Registry,
    outgoing: &'c mut Vec<Outgoing>,
    external: &'c mut Vec<ExternalSend>,
}

impl MessageSender<'_> {
    fn payload<M: MessageType>(&self, msg: &M) -> Result<Vec<u8>, ActorError> {
        if !self.registry.has_message(M::TYPE_TAG) {
            return Err(ActorError::UnregisteredMessageType(M::TYPE_TAG.into()));
        }
        Ok(codec::encode(msg)?)
    }

    /// Buffers `msg` for `receiver`; delivered when the call commits.
    pub fn tell<M: MessageType>(&mut self, receiver: &ActorId, msg: &M) -> Result<(), ActorError> {
        let payload = self.payload(msg)?;
        self.outgoing.push(Outgoing {
            receiver: receiver.clone(),
            type_tag: M::TYPE_TAG.to_string(),
            payload,
        });
        Ok(())
    }

    /// Buffers an output record keyed by `correlation_id`.
    pub fn tell_external<M: MessageType>(
        &mut self,
        correlation_id: &str,
        msg: &M,
    ) -> Result<(), ActorError> {
        let payload = self.payload(msg)?;
        self.external.push(ExternalSend {
            correlation_id: correlation_id.to_string(),
            type_tag: M::TYPE_TAG.to_string(),
            payload,
        });
        Ok(())
    }
}

pub struct Spawner<'c> {
    env: ProcessingEnv<'c>,
    spawns: &'c mut Vec<Spawn>,
}

impl Spawner<'_> {
    /// Returns the new actor's id right away. The actor comes into existence
    /// with the commit, which fails if the id is already taken.
    pub fn spawn<A: Actor>(
        &mut self,
        template: &A,
        partition: &str,
        instance: &str,
    ) -> Result<ActorId, ActorError> {
        self.env.registry.actor_type(A::TYPE_TAG)?;
        let id = ActorId::assign(partition, instance, self.env.policies.for_partition(partition))?;
        if self.spawns.iter().any(|s| s.id == id) {
            return Err(ActorError::DuplicateSpawn(id.to_string()));
        }
        self.spawns.push(Spawn {
            id: id.clone(),
            type_tag: A::TYPE_TAG.to_string(),
            state: codec::encode(template)?,
        });
        Ok(id)
    }
}

/// Handle on one queryable collection of the processing actor.
pub struct Collection<'c, I> {
    store: &'c Store,
    cache: &'c mut FieldCache,
    _item: PhantomData<I>,
}

impl<I: QueryableItem> Collection<'_, I> {
    pub fn collection_id(&self) -> &str {
        &self.cache.collection_id
    }

    fn load(&mut self, item_id: &str) -> Result<(), ActorError> {
        if self.cache.entries.contains_key(item_id) {
            return Ok(());
        }
        let key = CollectionItemRecord::key(&self.cache.collection_id, item_id);
        if let Some(item) = self.store.get(&self.cache.table, &key)? {
            let rec = CollectionItemRecord::from_item(&item)?;
            let value: I = codec::decode(&rec.payload)?;
            self.cache
                .entries
                .insert(item_id.to_string(), CacheEntry::new(Some(value), Some(rec.payload)));
        }
        Ok(())
    }

    /// Cached value, read from storage on first access. Changes made through
    /// the returned reference are persisted when the call commits.
    pub fn get(&mut self, item_id: &str) -> Result<&mut I, ActorError> {
        self.load(item_id)?;
        let not_found = || ActorError::ItemNotFound {
            collection: self.cache.collection_id.clone(),
            item_id: item_id.to_string(),
        };
        let err = not_found();
        self.cache
            .entries
            .get_mut(item_id)
            .and_then(|e| e.value.as_mut())
            .and_then(|v| v.downcast_mut::<I>())
            .ok_or(err)
    }

    pub fn contains(&mut self, item_id: &str) -> Result<bool, ActorError> {
        self.load(item_id)?;
        Ok(self
            .cache
            .entries
            .get(item_id)
            .is_some_and(|e| e.value.is_some()))
    }

    /// Items whose attribute `attribute` equals `value`, by ascending item id.
    /// Items changed earlier in this call are matched on their new values.
    pub fn find(&mut self, attribute: &str, value: &str) -> Result<Vec<I>, ActorError> {
        if !I::QUERYABLE.contains(&attribute) {
            return Err(ActorError::UnknownQueryableAttribute(attribute.to_string()));
        }
        let q = Query::index(&self.cache.table, attribute, value).within(self.cache.collection_id.as_str());
        for item in self.store.query(&q)? {
            let rec = CollectionItemRecord::from_item(&item)?;
            if self.cache.entries.contains_key(&rec.item_id) {
                continue;
            }
            let decoded: I = codec::decode(&rec.payload)?;
            self.cache
                .entries
                .insert(rec.item_id, CacheEntry::new(Some(decoded), Some(rec.payload)));
        }
        Ok(self
            .cache
            .entries
            .values()
            .filter(|e| {
                e.attributes()
                    .is_some_and(|a| a.get(attribute).is_some_and(|v| v == value))
            })
            .filter_map(|e| e.value.as_deref()?.downcast_ref::<I>().cloned())
            .collect())
    }

    /// Inserts or replaces an item.
    pub fn put(&mut self, item: I) {
        let id = item.item_id();
        match self.cache.entries.get_mut(&id) {
            Some(e) => e.value = Some(Box::new(item)),
            None => {
                self.cache.entries.insert(id, CacheEntry::new(Some(item), None));
            }
        }
    }

    pub fn delete(&mut self, item_id: &str) {
        match self.cache.entries.get_mut(item_id) {
            Some(e) => e.value = None,
            None => {
                // Unknown whether it is stored: an empty committed form forces
                // a delete at commit.
                self.cache
                    .entries
                    .insert(item_id.to_string(), CacheEntry::new::<I>(None, Some(Vec::new())));
            }
        }
    }
}
