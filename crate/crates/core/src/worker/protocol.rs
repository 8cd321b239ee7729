//! Storage-level steps of the shard lifecycle. Each function is one protocol
//! step so tests can interleave them with other writers.

use super::commit::{fencing_condition, Fence};
use super::gate::GatedStore;
use super::WorkerError;
use crate::model::{
    tables, ActorTaskRecord, MessageEnvelope, ShardRef, WorkerLeaseRecord, NO_WORKER,
};
use crate::txkv::{Condition, KvError, Query, WriteAction};

/// Retries `f` while it fails transiently.
pub fn retry_transient<T>(mut f: impl FnMut() -> Result<T, WorkerError>) -> Result<T, WorkerError> {
    loop {
        match f() {
            Err(e) if e.is_transient() => continue,
            other => return other,
        }
    }
}

/// Result of a conditional write where losing the race is expected.
fn conditional(r: Result<Option<crate::txkv::Item>, WorkerError>) -> Result<bool, WorkerError> {
    match r {
        Ok(_) => Ok(true),
        Err(WorkerError::Store(KvError::ConditionFailed { .. })) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Unassigned shards, oldest first.
pub fn free_shards(store: &GatedStore) -> Result<Vec<ActorTaskRecord>, WorkerError> {
    let q = Query::index(tables::ACTOR_TASK, tables::ACTOR_TASK_BY_WORKER, NO_WORKER);
    let mut recs = store
        .query(&q)?
        .iter()
        .map(ActorTaskRecord::from_item)
        .collect::<Result<Vec<_>, _>>()?;
    recs.sort_by(|a, b| {
        (a.insertion_time, &a.shard_ref).cmp(&(b.insertion_time, &b.shard_ref))
    });
    Ok(recs)
}

/// Takes ownership of `shard` if it is still unassigned. Returns the epoch
/// of the new claim.
pub fn claim(store: &GatedStore, worker_id: &str, shard: &ShardRef) -> Result<Option<i64>, WorkerError> {
    let action = WriteAction::update(tables::ACTOR_TASK, ActorTaskRecord::key(shard))
        .set("worker_id", worker_id)
        .set("is_sealed", false)
        .increment("epoch", 1)
        .when(Condition::And(vec![
            Condition::Exists,
            Condition::equals("worker_id", NO_WORKER),
        ]));
    match store.write(action) {
        Ok(Some(item)) => Ok(Some(ActorTaskRecord::from_item(&item)?.epoch)),
        Ok(None) => Ok(None),
        Err(WorkerError::Store(KvError::ConditionFailed { .. })) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Claims up to `max` free shards in insertion order. Lost races and
/// transient failures skip the candidate.
pub fn acquire(store: &GatedStore, worker_id: &str, max: usize) -> Result<Vec<(ShardRef, i64)>, WorkerError> {
    let mut out = Vec::new();
    if max == 0 {
        return Ok(out);
    }
    for rec in free_shards(store)? {
        match claim(store, worker_id, &rec.shard_ref) {
            Ok(Some(epoch)) => out.push((rec.shard_ref, epoch)),
            Ok(None) => {}
            Err(e) if e.is_transient() => {}
            Err(e) => return Err(e),
        }
        if out.len() == max {
            break;
        }
    }
    Ok(out)
}

/// Every envelope of the shard in sort-key order, in one query.
pub fn poll_inbox(store: &GatedStore, shard: &ShardRef) -> Result<Vec<MessageEnvelope>, WorkerError> {
    store
        .query(&Query::partition(tables::ACTOR_INBOX, shard.canonical()))?
        .iter()
        .map(|i| MessageEnvelope::from_item(i).map_err(WorkerError::from))
        .collect()
}

pub fn task_record(store: &GatedStore, shard: &ShardRef) -> Result<Option<ActorTaskRecord>, WorkerError> {
    store
        .get(tables::ACTOR_TASK, &ActorTaskRecord::key(shard))?
        .map(|i| ActorTaskRecord::from_item(&i).map_err(WorkerError::from))
        .transpose()
}

/// Gives the shard back to the pool; `false` if it was no longer ours.
pub fn release(store: &GatedStore, fence: Fence<'_>, shard: &ShardRef) -> Result<bool, WorkerError> {
    let action = WriteAction::update(tables::ACTOR_TASK, ActorTaskRecord::key(shard))
        .set("worker_id", NO_WORKER)
        .when(Condition::And(vec![Condition::Exists, fencing_condition(fence)]));
    retry_transient(|| conditional(store.write(action.clone())))
}

/// Passivation step 1: seal. Returns the message count seen at sealing.
pub fn seal(store: &GatedStore, fence: Fence<'_>, shard: &ShardRef) -> Result<Option<i64>, WorkerError> {
    let action = WriteAction::update(tables::ACTOR_TASK, ActorTaskRecord::key(shard))
        .set("is_sealed", true)
        .when(Condition::And(vec![Condition::Exists, fence.owned()]));
    match retry_transient(|| store.write(action.clone())) {
        Ok(Some(item)) => Ok(Some(ActorTaskRecord::from_item(&item)?.msg_count)),
        Ok(None) => Ok(None),
        Err(WorkerError::Store(KvError::ConditionFailed { .. })) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Passivation step 2: strongly consistent inbox check.
pub fn inbox_empty(store: &GatedStore, shard: &ShardRef) -> Result<bool, WorkerError> {
    let q = Query::partition(tables::ACTOR_INBOX, shard.canonical()).limit(1);
    Ok(store.query(&q)?.is_empty())
}

/// Passivation step 3: delete the record unless a sender got in since
/// sealing.
pub fn delete_sealed(
    store: &GatedStore,
    fence: Fence<'_>,
    shard: &ShardRef,
    sealed_count: i64,
) -> Result<bool, WorkerError> {
    let action = WriteAction::delete(tables::ACTOR_TASK, ActorTaskRecord::key(shard)).when(
        Condition::And(vec![
            fence.owned(),
            Condition::equals("is_sealed", true),
            Condition::equals("msg_count", sealed_count),
        ]),
    );
    retry_transient(|| conditional(store.write(action.clone())))
}

pub fn unseal(store: &GatedStore, fence: Fence<'_>, shard: &ShardRef) -> Result<bool, WorkerError> {
    let action = WriteAction::update(tables::ACTOR_TASK, ActorTaskRecord::key(shard))
        .set("is_sealed", false)
        .when(Condition::And(vec![Condition::Exists, fence.owned()]));
    retry_transient(|| conditional(store.write(action.clone())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Passivation {
    /// Record deleted; nobody tracks the shard.
    Passive,
    /// Messages arrived; the shard stays owned and unsealed.
    Aborted,
    /// The shard was no longer ours.
    Lost,
}

pub fn passivate(store: &GatedStore, fence: Fence<'_>, shard: &ShardRef) -> Result<Passivation, WorkerError> {
    let Some(c0) = seal(store, fence, shard)? else {
        return Ok(Passivation::Lost);
    };
    let aborted = |store: &GatedStore| -> Result<Passivation, WorkerError> {
        Ok(if unseal(store, fence, shard)? {
            Passivation::Aborted
        } else {
            Passivation::Lost
        })
    };
    if !inbox_empty(store, shard)? {
        return aborted(store);
    }
    if delete_sealed(store, fence, shard, c0)? {
        Ok(Passivation::Passive)
    } else {
        aborted(store)
    }
}

pub fn heartbeat(store: &GatedStore, worker_id: &str, now_millis: u64) -> Result<(), WorkerError> {
    let rec = WorkerLeaseRecord {
        worker_id: worker_id.to_string(),
        heartbeat_time: now_millis,
    };
    retry_transient(|| store.write(WriteAction::put(tables::WORKER_LEASE, rec.to_item())).map(|_| ()))
}

/// Frees the shards of every worker whose lease expired. Returns the shards
/// this call reclaimed with their previous owner.
pub fn reclaim_expired(
    store: &GatedStore,
    self_id: &str,
    now_millis: u64,
    lease_millis: u64,
) -> Result<Vec<(ShardRef, String)>, WorkerError> {
    let mut out = Vec::new();
    for item in store.scan(tables::WORKER_LEASE)? {
        let lease = WorkerLeaseRecord::from_item(&item)?;
        if lease.worker_id == self_id || lease.heartbeat_time + lease_millis >= now_millis {
            continue;
        }
        let q = Query::index(tables::ACTOR_TASK, tables::ACTOR_TASK_BY_WORKER, lease.worker_id.as_str());
        for item in store.query(&q)? {
            let rec = ActorTaskRecord::from_item(&item)?;
            if reclaim(store, &lease.worker_id, &rec.shard_ref)? {
                out.push((rec.shard_ref, lease.worker_id.clone()));
            }
        }
        // Drop the stale lease unless the worker came back meanwhile.
        let stale = WriteAction::delete(tables::WORKER_LEASE, item.key.clone()).when(
            Condition::equals("heartbeat_time", lease.heartbeat_time as i64),
        );
        retry_transient(|| conditional(store.write(stale.clone())))?;
    }
    Ok(out)
}

pub fn reclaim(store: &GatedStore, from: &str, shard: &ShardRef) -> Result<bool, WorkerError> {
    let action = WriteAction::update(tables::ACTOR_TASK, ActorTaskRecord::key(shard))
        .set("worker_id", NO_WORKER)
        .set("is_sealed", false)
        .when(Condition::And(vec![
            Condition::Exists,
            Condition::equals("worker_id", from),
        ]));
    retry_transient(|| conditional(store.write(action.clone())))
}
