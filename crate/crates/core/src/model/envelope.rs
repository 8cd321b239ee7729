use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ids::{ActorId, ShardRef};
use super::{require, tables, ModelError};
use crate::txkv::{Item, ItemKey};

/// Bits of the timestamp reserved for the per-sender sequence number.
pub const SEQUENCE_BITS: u32 = 20;

/// `millis * 2^20 + seq`; `seq` is truncated to its 20 bits.
pub fn compose_timestamp(millis: u64, seq: u64) -> u64 {
    (millis << SEQUENCE_BITS) | (seq & ((1 << SEQUENCE_BITS) - 1))
}

pub fn timestamp_millis(ts: u64) -> u64 {
    ts >> SEQUENCE_BITS
}

/// Next timestamp for a sender whose previous send used `last`: the current
/// millisecond when time has moved on, otherwise one more than `last`.
pub fn next_timestamp(now_millis: u64, last: u64) -> u64 {
    compose_timestamp(now_millis, 0).max(last + 1)
}

/// Sort key of an inbox entry. Fixed-width decimal keeps the text order equal
/// to the numeric order of the timestamp.
pub fn sort_key(timestamp: u64, unique_id: &str) -> String {
    format!("{timestamp:020}#{unique_id}")
}

pub fn parse_sort_key(s: &str) -> Result<(u64, String), ModelError> {
    let (ts, uid) = s
        .split_once('#')
        .ok_or_else(|| ModelError::Corrupt(format!("bad inbox sort key {s:?}")))?;
    let ts = ts
        .parse()
        .map_err(|_| ModelError::Corrupt(format!("bad timestamp in {s:?}")))?;
    Ok((ts, uid.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SenderId {
    Actor(ActorId),
    External,
}

pub const EXTERNAL_SENDER: &str = "external";

impl fmt::Display for SenderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SenderId::Actor(id) => id.fmt(f),
            SenderId::External => f.write_str(EXTERNAL_SENDER),
        }
    }
}

impl FromStr for SenderId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == EXTERNAL_SENDER {
            Ok(SenderId::External)
        } else {
            s.parse().map(SenderId::Actor)
        }
    }
}

impl TryFrom<String> for SenderId {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<SenderId> for String {
    fn from(s: SenderId) -> String {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEnvelope {
    pub shard_ref: ShardRef,
    pub timestamp: u64,
    pub unique_id: String,
    pub sender: SenderId,
    pub receiver: ActorId,
    pub type_tag: String,
    pub payload: Vec<u8>,
}

impl MessageEnvelope {
    pub fn sort_key(&self) -> String {
        sort_key(self.timestamp, &self.unique_id)
    }

    pub fn key(&self) -> ItemKey {
        ItemKey::composite(self.shard_ref.canonical(), self.sort_key())
    }

    pub fn to_item(&self) -> Item {
        Item::new(self.key())
            .with("sender_id", self.sender.to_string())
            .with("receiver_id", self.receiver.to_string())
            .with("type_tag", self.type_tag.as_str())
            .with("payload", self.payload.clone())
    }

    pub fn from_item(item: &Item) -> Result<Self, ModelError> {
        let table = tables::ACTOR_INBOX;
        let shard_ref: ShardRef = item
            .key
            .partition_key
            .as_text()
            .ok_or_else(|| ModelError::Corrupt("inbox partition key is not text".into()))?
            .parse()?;
        let sk = item
            .key
            .sort_key
            .as_ref()
            .and_then(|v| v.as_text())
            .ok_or_else(|| ModelError::Corrupt("inbox sort key missing".into()))?;
        let (timestamp, unique_id) = parse_sort_key(sk)?;
        Ok(MessageEnvelope {
            shard_ref,
            timestamp,
            unique_id,
            sender: require(item.text("sender_id"), table, "sender_id")?.parse()?,
            receiver: require(item.text("receiver_id"), table, "receiver_id")?.parse()?,
            type_tag: require(item.text("type_tag"), table, "type_tag")?.to_string(),
            payload: require(item.blob("payload"), table, "payload")?.to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn envelope(ts: u64, uid: &str) -> MessageEnvelope {
        let receiver = ActorId::new("bank", "0", "b1").unwrap();
        MessageEnvelope {
            shard_ref: receiver.shard_ref(),
            timestamp: ts,
            unique_id: uid.into(),
            sender: SenderId::External,
            receiver,
            type_tag: "Transfer".into(),
            payload: vec![1, 2, 3],
        }
    }

    #[test]
    fn item_round_trip() {
        let e = envelope(compose_timestamp(1_700_000_000_123, 5), "u-1");
        let item = e.to_item();
        assert_eq!(item.key.partition_key.as_text(), Some("bank/0"));
        assert_eq!(MessageEnvelope::from_item(&item).unwrap(), e);
    }

    #[test]
    fn sender_text_forms() {
        assert_eq!("external".parse::<SenderId>().unwrap(), SenderId::External);
        let a: SenderId = "p/1/x".parse().unwrap();
        assert_eq!(a.to_string(), "p/1/x");
        assert!("p/x".parse::<SenderId>().is_err());
    }

    #[test]
    fn timestamps_advance_within_one_millisecond() {
        let t0 = next_timestamp(1000, 0);
        let t1 = next_timestamp(1000, t0);
        let t2 = next_timestamp(999, t1);
        assert!(t0 < t1 && t1 < t2);
        assert_eq!(timestamp_millis(t2), 1000);
        let t3 = next_timestamp(1001, t2);
        assert_eq!(t3, compose_timestamp(1001, 0));
    }

    #[test]
    fn sort_key_order_matches_numeric_order() {
        let a = sort_key(9, "z");
        let b = sort_key(10, "a");
        assert!(a < b);
        assert_eq!(parse_sort_key(&b).unwrap(), (10, "a".to_string()));
        assert!(parse_sort_key("nohash").is_err());
    }
}
