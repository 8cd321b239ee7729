use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::model::ShardRef;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Started,
    Claimed { shard: ShardRef },
    Parked { shard: ShardRef },
    Unparked { shard: ShardRef },
    PassivationStarted { shard: ShardRef },
    Passivated { shard: ShardRef },
    PassivationAborted { shard: ShardRef },
    Released { shard: ShardRef },
    Reclaimed { shard: ShardRef, from: String },
    Fenced { shard: ShardRef },
    ProcessingStarted { shard: ShardRef, unique_id: String, attempt: u32 },
    Committed { shard: ShardRef, unique_id: String },
    Retried { shard: ShardRef, unique_id: String, reason: String },
    DeadLettered { shard: ShardRef, unique_id: String, reason: String },
    Paused,
    Resumed,
    Stopped,
    Killed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Event {
    pub at_millis: u64,
    pub worker_id: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// Append-only log shared by all workers of a run.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    inner: Arc<Mutex<Vec<Event>>>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn record(&self, at_millis: u64, worker_id: &str, kind: EventKind) {
        self.inner
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(Event {
                at_millis,
                worker_id: worker_id.to_string(),
                kind,
            });
    }

    pub fn events(&self) -> Vec<Event> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
