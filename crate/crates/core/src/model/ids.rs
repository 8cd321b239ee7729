use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Reserved separator of the canonical text forms.
pub const SEPARATOR: char = '/';

/// Three-part actor identity: partition chosen by the developer, shard chosen
/// by the runtime, instance id unique inside the partition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ActorId {
    partition: String,
    shard: String,
    instance: String,
}

fn check_part(what: &str, s: &str) -> Result<(), ModelError> {
    if s.is_empty() {
        return Err(ModelError::MalformedId(format!("empty {what}")));
    }
    if s.contains(SEPARATOR) {
        return Err(ModelError::MalformedId(format!(
            "{what} {s:?} contains the reserved separator"
        )));
    }
    Ok(())
}

impl ActorId {
    pub fn new(partition: &str, shard: &str, instance: &str) -> Result<Self, ModelError> {
        check_part("partition name", partition)?;
        check_part("shard id", shard)?;
        check_part("instance id", instance)?;
        Ok(ActorId {
            partition: partition.to_string(),
            shard: shard.to_string(),
            instance: instance.to_string(),
        })
    }

    /// Builds the id of `instance` in `partition`, placing it with `policy`.
    pub fn assign(partition: &str, instance: &str, policy: ShardPolicy) -> Result<Self, ModelError> {
        let shard = assign_shard(partition, instance, policy);
        ActorId::new(partition, &shard.shard, instance)
    }

    pub fn partition(&self) -> &str {
        &self.partition
    }

    pub fn shard_id(&self) -> &str {
        &self.shard
    }

    pub fn instance(&self) -> &str {
        &self.instance
    }

    pub fn shard_ref(&self) -> ShardRef {
        ShardRef {
            partition: self.partition.clone(),
            shard: self.shard.clone(),
        }
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ActorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{SEPARATOR}{}{SEPARATOR}{}", self.partition, self.shard, self.instance)
    }
}

impl FromStr for ActorId {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(SEPARATOR).collect();
        match parts.as_slice() {
            [p, sh, i] => ActorId::new(p, sh, i),
            _ => Err(ModelError::MalformedId(format!(
                "{s:?} does not have three parts"
            ))),
        }
    }
}

impl TryFrom<String> for ActorId {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ActorId> for String {
    fn from(id: ActorId) -> String {
        id.to_string()
    }
}

/// Physical shard: the unit of claiming and the owner of one shared inbox.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ShardRef {
    partition: String,
    shard: String,
}

impl ShardRef {
    pub fn new(partition: &str, shard: &str) -> Result<Self, ModelError> {
        check_part("partition name", partition)?;
        check_part("shard id", shard)?;
        Ok(ShardRef {
            partition: partition.to_string(),
            shard: shard.to_string(),
        })
    }

    pub fn partition(&self) -> &str {
        &self.partition
    }

    pub fn shard_id(&self) -> &str {
        &self.shard
    }

    pub fn canonical(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ShardRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{SEPARATOR}{}", self.partition, self.shard)
    }
}

impl FromStr for ShardRef {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(SEPARATOR) {
            Some((p, sh)) => ShardRef::new(p, sh),
            None => Err(ModelError::MalformedId(format!("{s:?} is not a shard ref"))),
        }
    }
}

impl TryFrom<String> for ShardRef {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ShardRef> for String {
    fn from(s: ShardRef) -> String {
        s.to_string()
    }
}

/// Static hash bucketing of instance ids into shards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardPolicy {
    pub buckets: u32,
}

impl Default for ShardPolicy {
    fn default() -> Self {
        ShardPolicy { buckets: 8 }
    }
}

impl ShardPolicy {
    pub fn buckets(buckets: u32) -> Self {
        ShardPolicy {
            buckets: buckets.max(1),
        }
    }
}

/// Per-partition shard policies with a fallback.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ShardPolicies {
    pub default: ShardPolicy,
    pub per_partition: HashMap<String, ShardPolicy>,
}

impl ShardPolicies {
    pub fn new(default: ShardPolicy) -> Self {
        ShardPolicies {
            default,
            per_partition: HashMap::new(),
        }
    }

    pub fn with(mut self, partition: &str, policy: ShardPolicy) -> Self {
        self.per_partition.insert(partition.to_string(), policy);
        self
    }

    pub fn for_partition(&self, partition: &str) -> ShardPolicy {
        self.per_partition
            .get(partition)
            .copied()
            .unwrap_or(self.default)
    }
}

/// 64-bit FNV-1a; fixed so that placements are stable across builds.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn assign_shard(partition: &str, instance: &str, policy: ShardPolicy) -> ShardRef {
    let buckets = u64::from(policy.buckets.max(1));
    let bucket = fnv1a(instance.as_bytes()) % buckets;
    ShardRef {
        partition: partition.to_string(),
        shard: bucket.to_string(),
    }
}
