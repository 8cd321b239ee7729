use std::collections::HashMap;
use std::time::Duration;

use super::commit::{build_commit_plan, build_dead_letter_plan, ActionKind, CommitPlan, Fence};
use super::events::{EventKind, EventLog};
use super::gate::GatedStore;
use super::WorkerError;
use crate::api::{ActorError, ActorSlot, ProcessingEnv, Registry};
use crate::model::{ActorId, MessageEnvelope, ShardPolicies};
use crate::txkv::KvError;

/// Outcome of one envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Processed {
    Committed,
    DeadLettered(String),
    /// The shard is no longer owned by this worker.
    Fenced,
}

pub const REASON_TOO_LARGE: &str = "transaction-too-large";
pub const REASON_UNKNOWN_ACTOR: &str = "unknown-actor";

/// Everything an executor needs to run and commit messages.
pub struct Processor<'a> {
    pub store: &'a GatedStore,
    pub registry: &'a Registry,
    pub policies: &'a ShardPolicies,
    pub events: &'a EventLog,
    pub worker_id: &'a str,
    pub max_message_retries: u32,
    pub processing_cost: Duration,
    pub fencing: bool,
}

enum CommitError {
    Killed,
    Fenced,
    Transient,
    Permanent(String),
}

impl Processor<'_> {
    fn env(&self) -> ProcessingEnv<'_> {
        ProcessingEnv {
            store: self.store.raw(),
            registry: self.registry,
            policies: self.policies,
        }
    }

    fn now(&self) -> u64 {
        self.store.clock().now_millis()
    }

    fn log(&self, kind: EventKind) {
        self.events.record(self.now(), self.worker_id, kind);
    }

    fn commit(&self, plan: &CommitPlan) -> Result<(), CommitError> {
        match self.store.transact_write(plan.actions.clone()) {
            Ok(()) => Ok(()),
            Err(WorkerError::Store(KvError::ConditionFailed { index })) => {
                match plan.kind_at(index) {
                    Some(
                        ActionKind::Fencing
                        | ActionKind::FencedTaskUpsert
                        | ActionKind::ConsumeEnvelope,
                    ) => Err(CommitError::Fenced),
                    Some(ActionKind::InboxPut) => Err(CommitError::Transient),
                    Some(ActionKind::Spawn) => Err(CommitError::Permanent("duplicate-actor".into())),
                    k => Err(CommitError::Permanent(format!("condition failed on {k:?}"))),
                }
            }
            Err(WorkerError::Store(e)) if e.is_transient() => Err(CommitError::Transient),
            Err(WorkerError::Store(KvError::LimitExceeded { .. })) => {
                Err(CommitError::Permanent(REASON_TOO_LARGE.into()))
            }
            Err(WorkerError::Store(e)) => Err(CommitError::Permanent(e.to_string())),
            Err(WorkerError::Killed) => Err(CommitError::Killed),
            Err(e) => Err(CommitError::Permanent(e.to_string())),
        }
    }

    fn fence(&self, epoch: i64) -> Option<Fence<'_>> {
        self.fencing.then(|| Fence::new(self.worker_id, epoch))
    }

    fn dead_letter(
        &self,
        env: &MessageEnvelope,
        epoch: i64,
        reason: &str,
        attempts: u32,
    ) -> Result<Processed, WorkerError> {
        loop {
            self.store.gate().pass()?;
            let plan = build_dead_letter_plan(env, reason, attempts, self.worker_id, self.now(), self.fence(epoch));
            match self.commit(&plan) {
                Ok(()) => {
                    self.log(EventKind::DeadLettered {
                        shard: env.shard_ref.clone(),
                        unique_id: env.unique_id.clone(),
                        reason: reason.to_string(),
                    });
                    return Ok(Processed::DeadLettered(reason.to_string()));
                }
                Err(CommitError::Transient) => continue,
                Err(CommitError::Killed) => return Err(WorkerError::Killed),
                Err(CommitError::Fenced | CommitError::Permanent(_)) => return Ok(Processed::Fenced),
            }
        }
    }

    fn load<'s>(
        &self,
        slots: &'s mut HashMap<ActorId, ActorSlot>,
        id: &ActorId,
    ) -> Result<Option<&'s mut ActorSlot>, ActorError> {
        if !slots.contains_key(id) {
            match ActorSlot::load(self.env(), id)? {
                Some(s) => {
                    slots.insert(id.clone(), s);
                }
                None => return Ok(None),
            }
        }
        Ok(slots.get_mut(id))
    }

    /// Processes `env` and commits its effects under the claim `epoch`,
    /// retrying failed handlers up to the configured number of attempts
    /// before dead-lettering.
    pub fn process_and_commit(
        &self,
        slots: &mut HashMap<ActorId, ActorSlot>,
        env: &MessageEnvelope,
        epoch: i64,
    ) -> Result<Processed, WorkerError> {
        let mut attempts = 0u32;
        let limit = self.store.raw().transaction_item_limit();
        loop {
            self.store.gate().pass()?;
            let slot = match self.load(slots, &env.receiver) {
                Ok(Some(s)) => s,
                Ok(None) => return self.dead_letter(env, epoch, REASON_UNKNOWN_ACTOR, attempts),
                Err(e) => return self.dead_letter(env, epoch, &format!("unloadable: {e}"), attempts),
            };
            attempts += 1;
            self.log(EventKind::ProcessingStarted {
                shard: env.shard_ref.clone(),
                unique_id: env.unique_id.clone(),
                attempt: attempts,
            });
            self.store.clock().sleep(self.processing_cost);
            let failure = match slot.process(self.env(), env) {
                Err(e) if e.is_transient() => {
                    attempts -= 1;
                    "transient".to_string()
                }
                Err(e) => e.to_string(),
                Ok(fx) => {
                    if fx.action_count() > limit {
                        slot.rollback();
                        return self.dead_letter(env, epoch, REASON_TOO_LARGE, attempts);
                    }
                    let plan = build_commit_plan(
                        &fx,
                        self.fence(epoch),
                        self.now(),
                        slot.last_send_ts,
                        || uuid::Uuid::new_v4().to_string(),
                    );
                    match self.commit(&plan) {
                        Ok(()) => {
                            slot.mark_committed(&fx, plan.last_send_ts);
                            self.log(EventKind::Committed {
                                shard: env.shard_ref.clone(),
                                unique_id: env.unique_id.clone(),
                            });
                            return Ok(Processed::Committed);
                        }
                        Err(CommitError::Killed) => return Err(WorkerError::Killed),
                        Err(CommitError::Fenced) => {
                            slot.rollback();
                            return Ok(Processed::Fenced);
                        }
                        Err(CommitError::Transient) => {
                            slot.rollback();
                            attempts -= 1;
                            "transient".to_string()
                        }
                        Err(CommitError::Permanent(reason)) => {
                            slot.rollback();
                            if reason == REASON_TOO_LARGE {
                                return self.dead_letter(env, epoch, REASON_TOO_LARGE, attempts);
                            }
                            reason
                        }
                    }
                }
            };
            self.log(EventKind::Retried {
                shard: env.shard_ref.clone(),
                unique_id: env.unique_id.clone(),
                reason: failure.clone(),
            });
            if attempts >= self.max_message_retries {
                return self.dead_letter(env, epoch, &format!("handler-error: {failure}"), attempts);
            }
        }
    }
}
