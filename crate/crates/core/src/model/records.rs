use std::collections::BTreeMap;

use super::envelope::MessageEnvelope;
use super::ids::{ActorId, ShardRef};
use super::{require, tables, ModelError};
use crate::txkv::{Item, ItemKey};

/// Stored value of an unassigned `worker_id`.
pub const NO_WORKER: &str = "";

/// Prefix under which queryable attributes are stored on collection items.
pub const ATTR_PREFIX: &str = "attr.";

fn key_text<'a>(key: &'a ItemKey, table: &str) -> Result<&'a str, ModelError> {
    key.partition_key
        .as_text()
        .ok_or_else(|| ModelError::Corrupt(format!("{table} partition key is not text")))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorTaskRecord {
    pub shard_ref: ShardRef,
    pub worker_id: Option<String>,
    pub insertion_time: u64,
    pub is_sealed: bool,
    pub msg_count: i64,
    /// Bumped by every claim; commits are fenced on it.
    pub epoch: i64,
}

impl ActorTaskRecord {
    pub fn key(shard: &ShardRef) -> ItemKey {
        ItemKey::partition(shard.canonical())
    }

    pub fn to_item(&self) -> Item {
        Item::new(Self::key(&self.shard_ref))
            .with("worker_id", self.worker_id.as_deref().unwrap_or(NO_WORKER))
            .with("insertion_time", self.insertion_time as i64)
            .with("is_sealed", self.is_sealed)
            .with("msg_count", self.msg_count)
            .with("epoch", self.epoch)
    }

    pub fn from_item(item: &Item) -> Result<Self, ModelError> {
        let t = tables::ACTOR_TASK;
        let worker = require(item.text("worker_id"), t, "worker_id")?;
        Ok(ActorTaskRecord {
            shard_ref: key_text(&item.key, t)?.parse()?,
            worker_id: (worker != NO_WORKER).then(|| worker.to_string()),
            insertion_time: require(item.int("insertion_time"), t, "insertion_time")? as u64,
            is_sealed: require(item.bool("is_sealed"), t, "is_sealed")?,
            msg_count: require(item.int("msg_count"), t, "msg_count")?,
            epoch: item.int("epoch").unwrap_or(0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorStateRecord {
    pub actor_id: ActorId,
    pub type_tag: String,
    pub current_state: Vec<u8>,
    /// Timestamp of the last envelope this actor sent; keeps its send order
    /// monotone across owners.
    pub last_send_ts: u64,
}

impl ActorStateRecord {
    pub fn key(id: &ActorId) -> ItemKey {
        ItemKey::partition(id.canonical())
    }

    pub fn to_item(&self) -> Item {
        Item::new(Self::key(&self.actor_id))
            .with("type_tag", self.type_tag.as_str())
            .with("current_state", self.current_state.clone())
            .with("last_send_ts", self.last_send_ts as i64)
    }

    pub fn from_item(item: &Item) -> Result<Self, ModelError> {
        let t = tables::ACTOR_STATE;
        Ok(ActorStateRecord {
            actor_id: key_text(&item.key, t)?.parse()?,
            type_tag: require(item.text("type_tag"), t, "type_tag")?.to_string(),
            current_state: require(item.blob("current_state"), t, "current_state")?.to_vec(),
            last_send_ts: item.int("last_send_ts").unwrap_or(0) as u64,
        })
    }
}

pub fn collection_id(owner: &ActorId, field: &str) -> String {
    format!("{owner}#{field}")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionItemRecord {
    pub collection_id: String,
    pub item_id: String,
    pub payload: Vec<u8>,
    pub queryable_attributes: BTreeMap<String, String>,
}

impl CollectionItemRecord {
    pub fn key(collection_id: &str, item_id: &str) -> ItemKey {
        ItemKey::composite(collection_id, item_id)
    }

    pub fn to_item(&self) -> Item {
        let mut item = Item::new(Self::key(&self.collection_id, &self.item_id))
            .with("payload", self.payload.clone());
        for (name, value) in &self.queryable_attributes {
            item = item.with(&format!("{ATTR_PREFIX}{name}"), value.as_str());
        }
        item
    }

    pub fn from_item(item: &Item) -> Result<Self, ModelError> {
        let t = "collection";
        let item_id = item
            .key
            .sort_key
            .as_ref()
            .and_then(|v| v.as_text())
            .ok_or_else(|| ModelError::Corrupt("collection item id missing".into()))?;
        let queryable_attributes = item
            .attributes
            .iter()
            .filter_map(|(k, v)| {
                let name = k.strip_prefix(ATTR_PREFIX)?;
                Some((name.to_string(), v.as_text()?.to_string()))
            })
            .collect();
        Ok(CollectionItemRecord {
            collection_id: key_text(&item.key, t)?.to_string(),
            item_id: item_id.to_string(),
            payload: require(item.blob("payload"), t, "payload")?.to_vec(),
            queryable_attributes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutboxRecord {
    pub correlation_id: String,
    pub type_tag: String,
    pub content: Vec<u8>,
    pub sender_id: ActorId,
    pub timestamp: u64,
}

impl OutboxRecord {
    pub fn key(correlation_id: &str) -> ItemKey {
        ItemKey::partition(correlation_id)
    }

    pub fn to_item(&self) -> Item {
        Item::new(Self::key(&self.correlation_id))
            .with("type_tag", self.type_tag.as_str())
            .with("content", self.content.clone())
            .with("sender_id", self.sender_id.to_string())
            .with("timestamp", self.timestamp as i64)
    }

    pub fn from_item(item: &Item) -> Result<Self, ModelError> {
        let t = tables::OUTBOX;
        Ok(OutboxRecord {
            correlation_id: key_text(&item.key, t)?.to_string(),
            type_tag: require(item.text("type_tag"), t, "type_tag")?.to_string(),
            content: require(item.blob("content"), t, "content")?.to_vec(),
            sender_id: require(item.text("sender_id"), t, "sender_id")?.parse()?,
            timestamp: require(item.int("timestamp"), t, "timestamp")? as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerLeaseRecord {
    pub worker_id: String,
    pub heartbeat_time: u64,
}

impl WorkerLeaseRecord {
    pub fn key(worker_id: &str) -> ItemKey {
        ItemKey::partition(worker_id)
    }

    pub fn to_item(&self) -> Item {
        Item::new(Self::key(&self.worker_id)).with("heartbeat_time", self.heartbeat_time as i64)
    }

    pub fn from_item(item: &Item) -> Result<Self, ModelError> {
        let t = tables::WORKER_LEASE;
        Ok(WorkerLeaseRecord {
            worker_id: key_text(&item.key, t)?.to_string(),
            heartbeat_time: require(item.int("heartbeat_time"), t, "heartbeat_time")? as u64,
        })
    }
}

/// An envelope that exhausted its processing attempts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeadLetterRecord {
    pub envelope: MessageEnvelope,
    pub reason: String,
    pub attempts: u32,
    pub worker_id: String,
    pub at_millis: u64,
}

impl DeadLetterRecord {
    pub fn to_item(&self) -> Item {
        self.envelope
            .to_item()
            .with("reason", self.reason.as_str())
            .with("attempts", i64::from(self.attempts))
            .with("worker_id", self.worker_id.as_str())
            .with("at_millis", self.at_millis as i64)
    }

    pub fn from_item(item: &Item) -> Result<Self, ModelError> {
        let t = tables::DEAD_LETTER;
        Ok(DeadLetterRecord {
            envelope: MessageEnvelope::from_item(item)?,
            reason: require(item.text("reason"), t, "reason")?.to_string(),
            attempts: require(item.int("attempts"), t, "attempts")? as u32,
            worker_id: require(item.text("worker_id"), t, "worker_id")?.to_string(),
            at_millis: require(item.int("at_millis"), t, "at_millis")? as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SenderId;

    #[test]
    fn task_record_maps_missing_worker_to_sentinel() {
        let r = ActorTaskRecord {
            shard_ref: "bank/3".parse().unwrap(),
            worker_id: None,
            insertion_time: 17,
            is_sealed: false,
            msg_count: 2,
            epoch: 0,
        };
        let item = r.to_item();
        assert_eq!(item.text("worker_id"), Some(NO_WORKER));
        assert_eq!(ActorTaskRecord::from_item(&item).unwrap(), r);
        let owned = ActorTaskRecord {
            worker_id: Some("w1".into()),
            ..r
        };
        assert_eq!(ActorTaskRecord::from_item(&owned.to_item()).unwrap(), owned);
    }

    #[test]
    fn collection_item_keeps_only_prefixed_attributes() {
        let owner = ActorId::new("Milan", "0", "agency-1").unwrap();
        let r = CollectionItemRecord {
            collection_id: collection_id(&owner, "journeys"),
            item_id: "j1".into(),
            payload: vec![1],
            queryable_attributes: [("Destination".to_string(), "Paris".to_string())].into(),
        };
        assert_eq!(r.collection_id, "Milan/0/agency-1#journeys");
        let item = r.to_item();
        assert_eq!(item.text("attr.Destination"), Some("Paris"));
        assert_eq!(CollectionItemRecord::from_item(&item).unwrap(), r);
    }

    #[test]
    fn other_records_round_trip() {
        let id = ActorId::new("bank", "0", "b").unwrap();
        let s = ActorStateRecord {
            actor_id: id.clone(),
            type_tag: "Bank".into(),
            current_state: vec![1, 2],
            last_send_ts: 99,
        };
        assert_eq!(ActorStateRecord::from_item(&s.to_item()).unwrap(), s);
        let o = OutboxRecord {
            correlation_id: "req-1".into(),
            type_tag: "Reply".into(),
            content: vec![3],
            sender_id: id.clone(),
            timestamp: 5,
        };
        assert_eq!(OutboxRecord::from_item(&o.to_item()).unwrap(), o);
        let l = WorkerLeaseRecord {
            worker_id: "w".into(),
            heartbeat_time: 8,
        };
        assert_eq!(WorkerLeaseRecord::from_item(&l.to_item()).unwrap(), l);
        let d = DeadLetterRecord {
            envelope: MessageEnvelope {
                shard_ref: id.shard_ref(),
                timestamp: 1,
                unique_id: "u".into(),
                sender: SenderId::External,
                receiver: id,
                type_tag: "Poison".into(),
                payload: vec![],
            },
            reason: "handler-error".into(),
            attempts: 3,
            worker_id: "w".into(),
            at_millis: 4,
        };
        assert_eq!(DeadLetterRecord::from_item(&d.to_item()).unwrap(), d);
    }

    #[test]
    fn missing_attribute_is_reported() {
        let item = Item::new(ItemKey::partition("req-1"));
        assert!(matches!(
            OutboxRecord::from_item(&item),
            Err(ModelError::MissingAttribute { .. })
        ));
    }
}
