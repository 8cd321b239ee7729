use super::cache::CollectionCache;
use super::context::{Context, ItemDelete, ItemWrite, SideEffectSet};
use super::registry::{DecodeFn, DynActor, Registry};
use super::ActorError;
use crate::model::{
    tables, ActorId, ActorStateRecord, CollectionItemRecord, MessageEnvelope, ShardPolicies,
};
use crate::txkv::Store;

/// What a processing call may read from.
#[derive(Clone, Copy)]
pub struct ProcessingEnv<'a> {
    pub store: &'a Store,
    pub registry: &'a Registry,
    pub policies: &'a ShardPolicies,
}

/// A loaded actor: live instance, its last committed state and its
/// collection cache.
pub struct ActorSlot {
    pub id: ActorId,
    pub type_tag: &'static str,
    /// Timestamp of the last envelope this actor committed.
    pub last_send_ts: u64,
    actor: Box<dyn DynActor>,
    committed_state: Vec<u8>,
    decode: DecodeFn,
    cache: CollectionCache,
}

impl ActorSlot {
    pub fn from_record(registry: &Registry, rec: ActorStateRecord) -> Result<Self, ActorError> {
        let info = registry.actor_type(&rec.type_tag)?;
        Ok(ActorSlot {
            id: rec.actor_id,
            type_tag: info.type_tag,
            last_send_ts: rec.last_send_ts,
            actor: info.decode(&rec.current_state)?,
            committed_state: rec.current_state,
            decode: info.decode_fn(),
            cache: CollectionCache::default(),
        })
    }

    /// Reads the actor's state; `None` if it was never created.
    pub fn load(env: ProcessingEnv<'_>, id: &ActorId) -> Result<Option<Self>, ActorError> {
        match env.store.get(tables::ACTOR_STATE, &ActorStateRecord::key(id))? {
            Some(item) => {
                let rec = ActorStateRecord::from_item(&item)?;
                Ok(Some(ActorSlot::from_record(env.registry, rec)?))
            }
            None => Ok(None),
        }
    }

    pub fn committed_state(&self) -> &[u8] {
        &self.committed_state
    }

    pub fn cache(&self) -> &CollectionCache {
        &self.cache
    }

    /// Runs the handler and collects its effects. On error the instance and
    /// cache are already rolled back to the last committed state.
    pub fn process(
        &mut self,
        env: ProcessingEnv<'_>,
        envelope: &MessageEnvelope,
    ) -> Result<SideEffectSet, ActorError> {
        let result = self.run(env, envelope);
        if result.is_err() {
            self.rollback();
        }
        result
    }

    fn run(
        &mut self,
        env: ProcessingEnv<'_>,
        envelope: &MessageEnvelope,
    ) -> Result<SideEffectSet, ActorError> {
        let mut cx = Context::new(&self.id, self.type_tag, env, &mut self.cache)?;
        self.actor.receive_dyn(envelope, &mut cx)?;
        let (outgoing, external, spawns) = (cx.outgoing, cx.external, cx.spawns);
        let new_state = self.actor.encode_state()?;
        let mut item_writes = Vec::new();
        let mut item_deletes = Vec::new();
        for ch in self.cache.changes()? {
            for (item_id, payload, attrs) in ch.puts {
                item_writes.push(ItemWrite {
                    table: ch.table.clone(),
                    record: CollectionItemRecord {
                        collection_id: ch.collection_id.clone(),
                        item_id,
                        payload,
                        queryable_attributes: attrs,
                    },
                });
            }
            for item_id in ch.deletes {
                item_deletes.push(ItemDelete {
                    table: ch.table.clone(),
                    collection_id: ch.collection_id.clone(),
                    item_id,
                });
            }
        }
        Ok(SideEffectSet {
            actor: self.id.clone(),
            type_tag: self.type_tag.to_string(),
            consumed: envelope.clone(),
            new_state,
            outgoing,
            external,
            spawns,
            item_writes,
            item_deletes,
        })
    }

    /// Adopts the effects of a committed call as the new baseline.
    pub fn mark_committed(&mut self, effects: &SideEffectSet, last_send_ts: u64) {
        self.committed_state = effects.new_state.clone();
        self.last_send_ts = self.last_send_ts.max(last_send_ts);
        if self.cache.mark_committed().is_err() {
            self.cache = CollectionCache::default();
        }
    }

    /// Restores the instance to its committed state and forgets uncommitted
    /// collection changes.
    pub fn rollback(&mut self) {
        self.actor = (self.decode)(&self.committed_state)
            .expect("committed state decodes under its own type");
        self.cache.rollback();
    }
}
