//! Small actors and a simulated deployment shared by the integration tests.
#![allow(dead_code)]

pub mod kv;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serverless_actors::api::{Actor, ActorError, Context, FeatureSet, MessageType, Registry};
use serverless_actors::clock::{Clock, Participation};
use serverless_actors::harness::{Client, ClientRequest, Cluster};
use serverless_actors::model::{tables, ActorId, ActorStateRecord, MessageEnvelope, ShardPolicies, ShardPolicy};
use serverless_actors::txkv::Store;
use serverless_actors::worker::{Hooks, Runtime, WorkerConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Emit {
    pub target: ActorId,
    pub count: u32,
}

impl MessageType for Emit {
    const TYPE_TAG: &'static str = "Emit";
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Note {
    pub seq: u64,
}

impl MessageType for Note {
    const TYPE_TAG: &'static str = "Note";
}

/// Sends numbered notes to a target, `count` per request.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Emitter {
    pub next: u64,
}

impl Actor for Emitter {
    const TYPE_TAG: &'static str = "Emitter";

    fn features() -> FeatureSet {
        FeatureSet::none().sender()
    }

    fn receive(&mut self, msg: &MessageEnvelope, cx: &mut Context<'_>) -> Result<(), ActorError> {
        let e: Emit = msg.decode()?;
        for _ in 0..e.count {
            cx.sender()?.tell(&e.target, &Note { seq: self.next })?;
            self.next += 1;
        }
        Ok(())
    }
}

/// Records every note by sender, in processing order.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Sink {
    pub seen: BTreeMap<String, Vec<u64>>,
}

impl Actor for Sink {
    const TYPE_TAG: &'static str = "Sink";

    fn receive(&mut self, msg: &MessageEnvelope, _cx: &mut Context<'_>) -> Result<(), ActorError> {
        let n: Note = msg.decode()?;
        self.seen.entry(msg.sender.to_string()).or_default().push(n.seq);
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step {
    pub n: u64,
    pub fail: bool,
}

impl MessageType for Step {
    const TYPE_TAG: &'static str = "Step";
}

/// Fails permanently on steps marked `fail`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Flaky {
    pub done: Vec<u64>,
}

impl Actor for Flaky {
    const TYPE_TAG: &'static str = "Flaky";

    fn receive(&mut self, msg: &MessageEnvelope, _cx: &mut Context<'_>) -> Result<(), ActorError> {
        let s: Step = msg.decode()?;
        if s.fail {
            return Err(ActorError::app(format!("step {} is poison", s.n)));
        }
        self.done.push(s.n);
        Ok(())
    }
}

pub fn registry() -> Registry {
    Registry::new()
        .actor::<Emitter>()
        .actor::<Sink>()
        .actor::<Flaky>()
        .message::<Emit>()
        .message::<Note>()
        .message::<Step>()
}

/// A store on a simulated clock, with the calling thread taking part in it.
pub struct Deployment {
    pub rt: Runtime,
    pub client: Client,
    pub clock: Clock,
    _me: Participation,
}

impl Deployment {
    pub fn new(buckets: u32) -> Deployment {
        let clock = Clock::simulated();
        let me = clock.participate();
        let store = Store::new(clock.clone());
        store.record_history(true);
        let rt = Runtime::new(store, registry(), ShardPolicies::new(ShardPolicy::buckets(buckets))).unwrap();
        let client = Client::new(rt.store.clone());
        Deployment {
            rt,
            client,
            clock,
            _me: me,
        }
    }

    pub fn cluster(&self, template: WorkerConfig) -> Cluster {
        Cluster::new(self.rt.clone(), template, Hooks::default())
    }

    pub fn tell<M: MessageType>(&self, cid: &str, to: &ActorId, msg: &M) {
        self.client.inject(&ClientRequest::new(cid, to.clone(), msg).unwrap()).unwrap();
    }

    pub fn state<A: Actor>(&self, id: &ActorId) -> A {
        let item = self.rt.store.get(tables::ACTOR_STATE, &ActorStateRecord::key(id)).unwrap().unwrap();
        let rec = ActorStateRecord::from_item(&item).unwrap();
        serverless_actors::model::codec::decode(&rec.current_state).unwrap()
    }
}

pub fn fast_config() -> WorkerConfig {
    WorkerConfig {
        polling_interval: Duration::from_millis(50),
        park_after_idle: Duration::from_millis(500),
        parking_threshold: Duration::from_secs(1),
        lease_duration: Duration::from_secs(3),
        heartbeat_interval: Duration::from_secs(1),
        ..WorkerConfig::default()
    }
}

/// Gated access for driving protocol steps by hand.
pub fn gated(rt: &Runtime) -> serverless_actors::worker::GatedStore {
    use std::sync::Arc;
    use serverless_actors::worker::{Gate, GatedStore};
    GatedStore::new(rt.store.clone(), Arc::new(Gate::new(rt.store.clock().clone())))
}

/// Runs passivation step by step with a client send placed at every subset
/// of the four gaps (before seal, after seal, after the inbox check, after
/// the delete or unseal). Returns one line per interleaving that ends with
/// no task record but a non-empty inbox, or with a record stuck sealed.
pub fn sealing_interleavings() -> (usize, Vec<String>) {
    use serverless_actors::model::ActorTaskRecord;
    use serverless_actors::worker::{protocol, Fence};

    let mut violations = Vec::new();
    let mut checked = 0;
    for mask in 0u32..16 {
        // Also vary whether the inbox already held a message at the start.
        for preloaded in [false, true] {
            checked += 1;
            let d = Deployment::new(1);
            let sink = d.rt.create_actor("p", "sink", &Sink::default()).unwrap();
            let shard = sink.shard_ref();
            let store = gated(&d.rt);
            let mut sent = 0;
            let mut send = |d: &Deployment| {
                sent += 1;
                d.tell(&format!("m{sent}"), &sink, &Note { seq: sent });
            };
            if preloaded {
                send(&d);
            } else {
                d.rt.store.write(serverless_actors::worker::task_upsert(&shard, 0, 0)).unwrap();
            }
            let epoch = protocol::claim(&store, "w", &shard).unwrap().unwrap();
            let fence = Fence::new("w", epoch);
            let gap = |i: u32| mask & (1 << i) != 0;

            if gap(0) {
                send(&d);
            }
            let outcome = match protocol::seal(&store, fence, &shard).unwrap() {
                None => "lost".to_string(),
                Some(c0) => {
                    if gap(1) {
                        send(&d);
                    }
                    let empty = protocol::inbox_empty(&store, &shard).unwrap();
                    if gap(2) {
                        send(&d);
                    }
                    if empty && protocol::delete_sealed(&store, fence, &shard, c0).unwrap() {
                        "passive".to_string()
                    } else {
                        protocol::unseal(&store, fence, &shard).unwrap();
                        "aborted".to_string()
                    }
                }
            };
            if gap(3) {
                send(&d);
            }

            let rec = protocol::task_record(&store, &shard).unwrap();
            let inbox = protocol::poll_inbox(&store, &shard).unwrap().len();
            let label = format!("mask {mask:04b} preloaded {preloaded} -> {outcome}");
            match rec {
                None if inbox > 0 => violations.push(format!("{label}: no record, {inbox} envelopes stranded")),
                Some(ActorTaskRecord { is_sealed: true, .. }) => violations.push(format!("{label}: left sealed")),
                _ => {}
            }
        }
    }
    (checked, violations)
}

/// Sends one poison step between good ones to a single actor and returns
/// the run's events, the dead-letter records and the actor's final state.
pub fn poison_run(max_retries: u32) -> (Vec<serverless_actors::worker::Event>, Vec<serverless_actors::model::DeadLetterRecord>, Flaky) {
    let d = Deployment::new(1);
    let a = d.rt.create_actor("p", "flaky", &Flaky::default()).unwrap();
    let mut cluster = d.cluster(WorkerConfig {
        max_message_retries: max_retries,
        ..fast_config()
    });
    cluster.start(1).unwrap();
    for n in 0..6u64 {
        d.tell(&format!("s{n}"), &a, &Step { n, fail: n == 2 });
        d.clock.sleep(Duration::from_millis(10));
    }
    assert!(cluster.await_quiescence(Duration::from_secs(60)), "no quiescence");
    cluster.shutdown();
    let dead = d
        .rt
        .store
        .scan(tables::DEAD_LETTER)
        .unwrap()
        .iter()
        .map(|i| serverless_actors::model::DeadLetterRecord::from_item(i).unwrap())
        .collect();
    (d.rt.events.events(), dead, d.state(&a))
}

/// Ten emitters send numbered notes to one sink in random request sizes.
/// Returns the per-sender sequences the sink processed.
pub fn fifo_run(seed: u64, senders: usize, per_sender: u64) -> BTreeMap<String, Vec<u64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let d = Deployment::new(4);
    let sink = d.rt.create_actor("sink", "s", &Sink::default()).unwrap();
    let emitters: Vec<ActorId> = (0..senders)
        .map(|i| d.rt.create_actor("em", &format!("e{i}"), &Emitter::default()).unwrap())
        .collect();
    d.rt.store
        .set_fault_plan(serverless_actors::txkv::FaultPlan::failures(seed, 0.02));
    let mut cluster = d.cluster(WorkerConfig {
        seed,
        ..fast_config()
    });
    cluster.start(2).unwrap();
    let mut left = vec![per_sender; senders];
    let mut k = 0;
    while left.iter().any(|&n| n > 0) {
        let i = rng.gen_range(0..senders);
        if left[i] == 0 {
            continue;
        }
        let count = rng.gen_range(1..=left[i].min(10));
        left[i] -= count;
        k += 1;
        d.tell(&format!("emit-{k}"), &emitters[i], &Emit { target: sink.clone(), count: count as u32 });
        d.clock.sleep(Duration::from_millis(rng.gen_range(0..20)));
    }
    assert!(cluster.await_quiescence(Duration::from_secs(600)), "no quiescence");
    cluster.shutdown();
    d.rt.store.set_fault_plan(serverless_actors::txkv::FaultPlan::disabled());
    d.state::<Sink>(&sink).seen
}
