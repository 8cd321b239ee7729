use std::collections::BTreeMap;

use crate::api::SideEffectSet;
use crate::model::{
    next_timestamp, tables, ActorStateRecord, ActorTaskRecord, CollectionItemRecord,
    DeadLetterRecord, MessageEnvelope, OutboxRecord, SenderId, ShardRef, NO_WORKER,
};
use crate::txkv::{Condition, WriteAction};

/// Role of each action in a commit, used to interpret a condition failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    ConsumeEnvelope,
    ActorState,
    ItemWrite,
    ItemDelete,
    Spawn,
    InboxPut,
    TaskUpsert,
    /// Upsert of the committing worker's own shard carrying the fencing
    /// condition.
    FencedTaskUpsert,
    Outbox,
    Fencing,
    DeadLetter,
}

#[derive(Debug, Clone)]
pub struct CommitPlan {
    pub actions: Vec<WriteAction>,
    pub kinds: Vec<ActionKind>,
    /// Envelopes this commit delivers.
    pub sent: Vec<MessageEnvelope>,
    /// Sender timestamp after this commit.
    pub last_send_ts: u64,
}

impl CommitPlan {
    fn push(&mut self, kind: ActionKind, action: WriteAction) {
        self.kinds.push(kind);
        self.actions.push(action);
    }

    pub fn kind_at(&self, index: usize) -> Option<ActionKind> {
        self.kinds.get(index).copied()
    }
}

/// Ownership of a shard as established by one claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fence<'a> {
    pub worker_id: &'a str,
    pub epoch: i64,
}

impl<'a> Fence<'a> {
    pub fn new(worker_id: &'a str, epoch: i64) -> Self {
        Fence { worker_id, epoch }
    }

    /// Same claim still in force, sealed or not.
    pub fn owned(&self) -> Condition {
        Condition::And(vec![
            Condition::equals("worker_id", self.worker_id),
            Condition::equals("epoch", self.epoch),
        ])
    }
}

/// The committing worker still holds the claim and the shard is not being
/// sealed.
pub fn fencing_condition(fence: Fence<'_>) -> Condition {
    Condition::And(vec![
        Condition::equals("worker_id", fence.worker_id),
        Condition::equals("epoch", fence.epoch),
        Condition::equals("is_sealed", false),
    ])
}

/// Creates the shard's task record as unassigned if absent, and counts `n`
/// new messages either way.
pub fn task_upsert(shard: &ShardRef, now_millis: u64, n: i64) -> WriteAction {
    WriteAction::update(tables::ACTOR_TASK, ActorTaskRecord::key(shard))
        .set_if_absent("worker_id", NO_WORKER)
        .set_if_absent("insertion_time", now_millis as i64)
        .set_if_absent("is_sealed", false)
        .increment("msg_count", n)
}

pub fn consume_envelope(env: &MessageEnvelope) -> WriteAction {
    WriteAction::delete(tables::ACTOR_INBOX, env.key()).when(Condition::Exists)
}

/// Inbox puts plus one task upsert per recipient shard; `fence` is attached
/// to the upsert of `own_shard` when that shard is a recipient.
fn deliver(
    plan: &mut CommitPlan,
    envelopes: Vec<MessageEnvelope>,
    now_millis: u64,
    own_shard: Option<&ShardRef>,
    fence: Option<Condition>,
) -> bool {
    let mut per_shard: BTreeMap<ShardRef, i64> = BTreeMap::new();
    for e in &envelopes {
        *per_shard.entry(e.shard_ref.clone()).or_default() += 1;
        plan.push(
            ActionKind::InboxPut,
            WriteAction::put(tables::ACTOR_INBOX, e.to_item()).when(Condition::NotExists),
        );
    }
    let mut fenced = false;
    for (shard, n) in per_shard {
        let up = task_upsert(&shard, now_millis, n);
        match (&fence, own_shard) {
            (Some(c), Some(own)) if *own == shard => {
                plan.push(ActionKind::FencedTaskUpsert, up.when(c.clone()));
                fenced = true;
            }
            _ => plan.push(ActionKind::TaskUpsert, up),
        }
    }
    plan.sent = envelopes;
    fenced
}

/// Builds the single transaction committing `fx`.
pub fn build_commit_plan(
    fx: &SideEffectSet,
    fence: Option<Fence<'_>>,
    now_millis: u64,
    last_send_ts: u64,
    mut unique_id: impl FnMut() -> String,
) -> CommitPlan {
    let own = fx.actor.shard_ref();
    let mut plan = CommitPlan {
        actions: Vec::new(),
        kinds: Vec::new(),
        sent: Vec::new(),
        last_send_ts,
    };
    plan.push(ActionKind::ConsumeEnvelope, consume_envelope(&fx.consumed));

    let mut ts = last_send_ts;
    let envelopes: Vec<MessageEnvelope> = fx
        .outgoing
        .iter()
        .map(|o| {
            ts = next_timestamp(now_millis, ts);
            MessageEnvelope {
                shard_ref: o.receiver.shard_ref(),
                timestamp: ts,
                unique_id: unique_id(),
                sender: SenderId::Actor(fx.actor.clone()),
                receiver: o.receiver.clone(),
                type_tag: o.type_tag.clone(),
                payload: o.payload.clone(),
            }
        })
        .collect();
    plan.last_send_ts = ts;

    let state = ActorStateRecord {
        actor_id: fx.actor.clone(),
        type_tag: fx.type_tag.clone(),
        current_state: fx.new_state.clone(),
        last_send_ts: ts,
    };
    plan.push(
        ActionKind::ActorState,
        WriteAction::put(tables::ACTOR_STATE, state.to_item()),
    );
    for w in &fx.item_writes {
        plan.push(ActionKind::ItemWrite, WriteAction::put(&w.table, w.record.to_item()));
    }
    for d in &fx.item_deletes {
        plan.push(
            ActionKind::ItemDelete,
            WriteAction::delete(&d.table, CollectionItemRecord::key(&d.collection_id, &d.item_id)),
        );
    }
    for s in &fx.spawns {
        let rec = ActorStateRecord {
            actor_id: s.id.clone(),
            type_tag: s.type_tag.clone(),
            current_state: s.state.clone(),
            last_send_ts: 0,
        };
        plan.push(
            ActionKind::Spawn,
            WriteAction::put(tables::ACTOR_STATE, rec.to_item()).when(Condition::NotExists),
        );
    }
    let fence = fence.map(fencing_condition);
    let merged = deliver(&mut plan, envelopes, now_millis, Some(&own), fence.clone());
    for e in &fx.external {
        let rec = OutboxRecord {
            correlation_id: e.correlation_id.clone(),
            type_tag: e.type_tag.clone(),
            content: e.payload.clone(),
            sender_id: fx.actor.clone(),
            timestamp: now_millis,
        };
        plan.push(ActionKind::Outbox, WriteAction::put(tables::OUTBOX, rec.to_item()));
    }
    if let (Some(c), false) = (fence, merged) {
        plan.push(
            ActionKind::Fencing,
            WriteAction::check(tables::ACTOR_TASK, ActorTaskRecord::key(&own), c),
        );
    }
    plan
}

/// Moves `env` to the dead-letter table in one transaction.
pub fn build_dead_letter_plan(
    env: &MessageEnvelope,
    reason: &str,
    attempts: u32,
    worker_id: &str,
    now_millis: u64,
    fence: Option<Fence<'_>>,
) -> CommitPlan {
    let mut plan = CommitPlan {
        actions: Vec::new(),
        kinds: Vec::new(),
        sent: Vec::new(),
        last_send_ts: 0,
    };
    plan.push(ActionKind::ConsumeEnvelope, consume_envelope(env));
    let rec = DeadLetterRecord {
        envelope: env.clone(),
        reason: reason.to_string(),
        attempts,
        worker_id: worker_id.to_string(),
        at_millis: now_millis,
    };
    plan.push(
        ActionKind::DeadLetter,
        WriteAction::put(tables::DEAD_LETTER, rec.to_item()),
    );
    if let Some(f) = fence {
        plan.push(
            ActionKind::Fencing,
            WriteAction::check(
                tables::ACTOR_TASK,
                ActorTaskRecord::key(&env.shard_ref),
                fencing_condition(f),
            ),
        );
    }
    plan
}

/// Transaction an external client uses to deliver one envelope.
pub fn build_inject_plan(env: &MessageEnvelope, now_millis: u64) -> CommitPlan {
    let mut plan = CommitPlan {
        actions: Vec::new(),
        kinds: Vec::new(),
        sent: Vec::new(),
        last_send_ts: env.timestamp,
    };
    deliver(&mut plan, vec![env.clone()], now_millis, None, None);
    plan
}
