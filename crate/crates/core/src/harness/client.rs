use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::api::MessageType;
use crate::model::{codec, next_timestamp, tables, ActorId, MessageEnvelope, ModelError, OutboxRecord, SenderId};
use crate::txkv::{KvError, Store};
use crate::worker::build_inject_plan;

use super::HarnessError;

/// A request from outside the system. The correlation id doubles as the
/// envelope's unique id, which makes re-injection idempotent.
#[derive(Debug, Clone)]
pub struct ClientRequest {
    pub correlation_id: String,
    pub target: ActorId,
    pub type_tag: String,
    pub payload: Vec<u8>,
}

impl ClientRequest {
    pub fn new<M: MessageType>(correlation_id: impl Into<String>, target: ActorId, msg: &M) -> Result<Self, ModelError> {
        Ok(ClientRequest {
            correlation_id: correlation_id.into(),
            target,
            type_tag: M::TYPE_TAG.to_string(),
            payload: codec::encode(msg)?,
        })
    }
}

/// Delivery receipt of an injected request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Injection {
    pub correlation_id: String,
    pub at_millis: u64,
    pub timestamp: u64,
    /// Transient failures retried before the envelope became durable.
    pub retries: u32,
}

/// External client facade. Safe to share between load-generator threads.
#[derive(Clone)]
pub struct Client {
    store: Arc<Store>,
    last_ts: Arc<Mutex<u64>>,
}

impl Client {
    pub fn new(store: Arc<Store>) -> Self {
        Client {
            store,
            last_ts: Arc::new(Mutex::new(0)),
        }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Delivers `req` in one transaction: inbox put plus task upsert.
    /// Transient failures are retried with the same envelope; finding it
    /// already present counts as delivered.
    pub fn inject(&self, req: &ClientRequest) -> Result<Injection, HarnessError> {
        let clock = self.store.clock();
        let timestamp = {
            let mut last = self.last_ts.lock().unwrap_or_else(|e| e.into_inner());
            *last = next_timestamp(clock.now_millis(), *last);
            *last
        };
        let env = MessageEnvelope {
            shard_ref: req.target.shard_ref(),
            timestamp,
            unique_id: req.correlation_id.clone(),
            sender: SenderId::External,
            receiver: req.target.clone(),
            type_tag: req.type_tag.clone(),
            payload: req.payload.clone(),
        };
        let at_millis = clock.now_millis();
        let mut retries = 0;
        loop {
            let plan = build_inject_plan(&env, clock.now_millis());
            match self.store.transact_write(plan.actions) {
                Ok(()) | Err(KvError::ConditionFailed { index: 0 }) => {
                    return Ok(Injection {
                        correlation_id: req.correlation_id.clone(),
                        at_millis,
                        timestamp,
                        retries,
                    })
                }
                Err(e) if e.is_transient() => retries += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn response(&self, correlation_id: &str) -> Result<Option<OutboxRecord>, HarnessError> {
        self.store
            .get(tables::OUTBOX, &OutboxRecord::key(correlation_id))?
            .map(|i| OutboxRecord::from_item(&i).map_err(HarnessError::from))
            .transpose()
    }

    /// Polls the outbox every `poll` until the response shows up.
    pub fn await_response(
        &self,
        correlation_id: &str,
        timeout: Duration,
        poll: Duration,
    ) -> Result<OutboxRecord, HarnessError> {
        let clock = self.store.clock();
        let deadline = clock.now() + timeout;
        loop {
            match self.response(correlation_id) {
                Ok(Some(r)) => return Ok(r),
                Ok(None) => {}
                Err(HarnessError::Store(e)) if e.is_transient() => {}
                Err(e) => return Err(e),
            }
            if clock.now() >= deadline {
                return Err(HarnessError::Timeout(correlation_id.to_string()));
            }
            clock.sleep(poll.min(deadline - clock.now()).max(Duration::from_millis(1)));
        }
    }
}

/// Decodes the content of an outbox record.
pub fn decode_response<M: MessageType>(rec: &OutboxRecord) -> Result<M, ModelError> {
    if rec.type_tag != M::TYPE_TAG {
        return Err(ModelError::Codec(format!(
            "expected {}, got {}",
            M::TYPE_TAG,
            rec.type_tag
        )));
    }
    codec::decode(&rec.content)
}
