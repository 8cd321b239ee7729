//! Lifecycle of one shard: claimed, parked when idle, passivated, then
//! brought back by a new message.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serverless_actors::api::{Actor, ActorError, Context, MessageType, Registry};
use serverless_actors::clock::Clock;
use serverless_actors::harness::{Client, ClientRequest, Cluster};
use serverless_actors::model::{tables, MessageEnvelope, ShardPolicies};
use serverless_actors::txkv::Store;
use serverless_actors::worker::{EventKind, Hooks, Runtime, WorkerConfig};

#[derive(Serialize, Deserialize)]
struct Ping;

impl MessageType for Ping {
    const TYPE_TAG: &'static str = "Ping";
}

#[derive(Default, Serialize, Deserialize)]
struct Counter {
    pings: u64,
}

impl Actor for Counter {
    const TYPE_TAG: &'static str = "Counter";

    fn receive(&mut self, _msg: &MessageEnvelope, _cx: &mut Context<'_>) -> Result<(), ActorError> {
        self.pings += 1;
        Ok(())
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clock = Clock::simulated();
    let _me = clock.participate();
    let rt = Runtime::new(
        Store::new(clock.clone()),
        Registry::new().actor::<Counter>().message::<Ping>(),
        ShardPolicies::default(),
    )?;
    let counter = rt.create_actor("counters", "c1", &Counter::default())?;
    let config = WorkerConfig {
        polling_interval: Duration::from_millis(100),
        park_after_idle: Duration::from_secs(1),
        parking_threshold: Duration::from_secs(3),
        ..WorkerConfig::default()
    };
    let mut cluster = Cluster::new(rt.clone(), config, Hooks::default());
    cluster.start(1)?;
    let client = Client::new(rt.store.clone());

    client.inject(&ClientRequest::new("p1", counter.clone(), &Ping)?)?;
    cluster.await_quiescence(Duration::from_secs(30));
    println!("task records once quiet: {}", rt.store.scan(tables::ACTOR_TASK)?.len());
    clock.sleep(Duration::from_secs(2));
    client.inject(&ClientRequest::new("p2", counter.clone(), &Ping)?)?;
    cluster.await_quiescence(Duration::from_secs(30));
    cluster.shutdown();

    let start = rt.events.events().first().map_or(0, |e| e.at_millis);
    for e in rt.events.events() {
        let what = match &e.kind {
            EventKind::Claimed { .. } => "claimed",
            EventKind::Committed { .. } => "committed",
            EventKind::Parked { .. } => "parked",
            EventKind::PassivationStarted { .. } => "sealing",
            EventKind::Passivated { .. } => "passivated",
            _ => continue,
        };
        println!("{:>6} ms  {what}", e.at_millis - start);
    }
    Ok(())
}
