use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::commit::Fence;
use super::config::WorkerConfig;
use super::events::{EventKind, EventLog};
use super::gate::{Gate, GatedStore};
use super::mailbox::Mailbox;
use super::process::{Processed, Processor};
use super::protocol::{self, Passivation};
use super::{Runtime, WorkerError};
use crate::api::{ActorSlot, Registry};
use crate::clock::{Clock, ClockThread, Parker};
use crate::model::{tables, ActorId, MessageEnvelope, ShardPolicies, ShardRef, WorkerLeaseRecord};
use crate::txkv::WriteAction;

type Actors = HashMap<ActorId, ActorSlot>;

/// Test-only switches.
#[derive(Debug, Clone, Default)]
pub struct Hooks {
    /// Commit without the ownership check. Breaks exactly-once on purpose.
    pub disable_fencing: bool,
}

enum ControlMsg {
    Claimed(ShardRef, i64),
    Unparked(ShardRef, i64, Actors),
    Done {
        shard: ShardRef,
        actors: Actors,
        fenced: bool,
        queue_wait: Duration,
    },
}

enum ParkingMsg {
    Park(ShardRef, i64, Actors),
    ReleaseAll,
}

struct Job {
    shard: ShardRef,
    epoch: i64,
    envelopes: Vec<MessageEnvelope>,
    actors: Actors,
    enqueued_at: Duration,
}

enum JobMsg {
    Run(Job),
    Shutdown,
}

struct Shared {
    config: WorkerConfig,
    store: GatedStore,
    registry: Arc<Registry>,
    policies: Arc<ShardPolicies>,
    events: EventLog,
    fencing: bool,
    stopping: AtomicBool,
    control_done: AtomicBool,
    /// Running shards held by the shard station, claims in flight included.
    active: AtomicUsize,
    /// Claim target, lowered while overloaded.
    active_cap: AtomicUsize,
    busy_jobs: AtomicUsize,
    owned: Mutex<BTreeSet<ShardRef>>,
    control: Mailbox<ControlMsg>,
    parking: Mailbox<ParkingMsg>,
    jobs: Mailbox<JobMsg>,
    pull_wake: Mailbox<()>,
    heartbeat_wake: Mailbox<()>,
}

impl Shared {
    fn clock(&self) -> &Clock {
        self.store.clock()
    }

    fn id(&self) -> &str {
        &self.config.worker_id
    }

    fn log(&self, kind: EventKind) {
        self.events.record(self.clock().now_millis(), self.id(), kind);
    }

    fn killed(&self) -> bool {
        self.store.gate().is_killed()
    }

    fn owned(&self) -> MutexGuard<'_, BTreeSet<ShardRef>> {
        self.owned.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn disown(&self, shard: &ShardRef) {
        self.owned().remove(shard);
    }

    fn wake_all(&self) {
        let c = self.clock();
        self.control.notify(c);
        self.parking.notify(c);
        self.jobs.notify(c);
        self.pull_wake.notify(c);
        self.heartbeat_wake.notify(c);
    }

    fn processor(&self) -> Processor<'_> {
        Processor {
            store: &self.store,
            registry: &self.registry,
            policies: &self.policies,
            events: &self.events,
            worker_id: self.id(),
            max_message_retries: self.config.max_message_retries,
            processing_cost: self.config.processing_cost,
            fencing: self.fencing,
        }
    }
}

/// A running worker: a handful of station threads sharing one store gate.
pub struct Worker {
    shared: Arc<Shared>,
    threads: Vec<ClockThread>,
}

impl Worker {
    pub fn start(rt: &Runtime, config: WorkerConfig) -> Result<Worker, WorkerError> {
        Worker::start_with_hooks(rt, config, Hooks::default())
    }

    pub fn start_with_hooks(rt: &Runtime, config: WorkerConfig, hooks: Hooks) -> Result<Worker, WorkerError> {
        config.validate()?;
        let clock = rt.store.clock().clone();
        let gate = Arc::new(Gate::new(clock.clone()));
        let shared = Arc::new(Shared {
            active_cap: AtomicUsize::new(config.max_active_shards),
            config,
            store: GatedStore::new(rt.store.clone(), gate),
            registry: rt.registry.clone(),
            policies: rt.policies.clone(),
            events: rt.events.clone(),
            fencing: !hooks.disable_fencing,
            stopping: AtomicBool::new(false),
            control_done: AtomicBool::new(false),
            active: AtomicUsize::new(0),
            busy_jobs: AtomicUsize::new(0),
            owned: Mutex::new(BTreeSet::new()),
            control: Mailbox::default(),
            parking: Mailbox::default(),
            jobs: Mailbox::default(),
            pull_wake: Mailbox::default(),
            heartbeat_wake: Mailbox::default(),
        });
        protocol::heartbeat(&shared.store, shared.id(), clock.now_millis())?;
        shared.log(EventKind::Started);
        let id = shared.id().to_string();
        let mut threads = Vec::new();
        let spawn = |name: &str, f: fn(Arc<Shared>)| {
            let sh = shared.clone();
            clock.spawn(&format!("{id}-{name}"), move || f(sh))
        };
        threads.push(spawn("shards", shard_station));
        threads.push(spawn("pulling", pulling_station));
        threads.push(spawn("parking", parking_station));
        threads.push(spawn("heartbeat", heartbeat_station));
        for i in 0..shared.config.processing_slots {
            threads.push(spawn(&format!("exec{i}"), executor));
        }
        Ok(Worker { shared, threads })
    }

    pub fn id(&self) -> &str {
        self.shared.id()
    }

    pub fn config(&self) -> &WorkerConfig {
        &self.shared.config
    }

    /// Stops pulling, finishes in-flight work and releases every shard.
    pub fn request_stop(&self) {
        self.shared.stopping.store(true, Ordering::SeqCst);
        self.shared.wake_all();
    }

    /// Abrupt stop: every later storage call of this worker fails.
    pub fn kill(&self) {
        if !self.shared.killed() {
            self.shared.store.gate().kill();
            self.shared.log(EventKind::Killed);
            self.shared.wake_all();
        }
    }

    /// Blocks every storage call of this worker until [`Worker::resume`].
    pub fn pause(&self) {
        self.shared.store.gate().pause();
        self.shared.log(EventKind::Paused);
    }

    pub fn resume(&self) {
        self.shared.store.gate().resume();
        self.shared.log(EventKind::Resumed);
    }

    pub fn is_killed(&self) -> bool {
        self.shared.killed()
    }

    /// No message batch queued or executing.
    pub fn is_idle(&self) -> bool {
        self.shared.busy_jobs.load(Ordering::SeqCst) == 0
    }

    pub fn is_finished(&self) -> bool {
        self.threads.iter().all(|t| t.is_finished())
    }

    /// Shards this worker believes it owns, running or parked.
    pub fn owned_shards(&self) -> Vec<ShardRef> {
        self.shared.owned().iter().cloned().collect()
    }

    pub fn join(self) {
        let clock = self.shared.clock().clone();
        for t in self.threads {
            t.join(&clock);
        }
    }
}

struct Running {
    epoch: i64,
    actors: Option<Actors>,
    next_poll: Duration,
    phased: bool,
    last_activity: Duration,
}

fn shard_station(sh: Arc<Shared>) {
    let clock = sh.clock().clone();
    let parker = Parker::new();
    let p = sh.config.polling_interval;
    let mut rng = ChaCha8Rng::seed_from_u64(sh.config.seed ^ fxhash(sh.id()));
    let mut shards: BTreeMap<ShardRef, Running> = BTreeMap::new();
    let mut waits: VecDeque<Duration> = VecDeque::new();
    let mut last_change = Duration::ZERO;
    let mut pending: Option<ControlMsg> = None;
    loop {
        if sh.killed() {
            break;
        }
        while let Some(m) = pending.take().or_else(|| sh.control.try_pop()) {
            let now = clock.now();
            match m {
                ControlMsg::Claimed(shard, epoch) => {
                    sh.log(EventKind::Claimed { shard: shard.clone() });
                    shards.insert(
                        shard,
                        Running {
                            epoch,
                            actors: Some(HashMap::new()),
                            next_poll: now,
                            phased: false,
                            last_activity: now,
                        },
                    );
                }
                ControlMsg::Unparked(shard, epoch, actors) => {
                    sh.active.fetch_add(1, Ordering::SeqCst);
                    shards.insert(
                        shard,
                        Running {
                            epoch,
                            actors: Some(actors),
                            next_poll: now,
                            phased: true,
                            last_activity: now,
                        },
                    );
                }
                ControlMsg::Done {
                    shard,
                    actors,
                    fenced,
                    queue_wait,
                } => {
                    waits.push_back(queue_wait);
                    if waits.len() > 16 {
                        waits.pop_front();
                    }
                    if fenced {
                        shards.remove(&shard);
                        sh.active.fetch_sub(1, Ordering::SeqCst);
                        sh.disown(&shard);
                        sh.log(EventKind::Fenced { shard });
                        sh.pull_wake.notify(&clock);
                    } else if let Some(r) = shards.get_mut(&shard) {
                        r.actors = Some(actors);
                        r.last_activity = now;
                    }
                }
            }
        }

        let now = clock.now();
        if sh.stopping.load(Ordering::SeqCst) {
            if shards.values().all(|r| r.actors.is_some()) {
                for (shard, r) in &shards {
                    match protocol::release(&sh.store, Fence::new(sh.id(), r.epoch), shard) {
                        Ok(_) => sh.log(EventKind::Released { shard: shard.clone() }),
                        Err(WorkerError::Killed) => break,
                        Err(_) => {}
                    }
                    sh.disown(shard);
                }
                sh.active.store(0, Ordering::SeqCst);
                sh.parking.push(&clock, ParkingMsg::ReleaseAll);
                break;
            }
        } else if poll_due(&sh, &clock, &mut shards, &mut rng, now, p).is_err() {
            break;
        }

        if !sh.stopping.load(Ordering::SeqCst) {
            rebalance(&sh, &mut shards, &mut waits, &mut last_change, now);
        }

        let deadline = shards
            .values()
            .filter(|r| r.actors.is_some())
            .map(|r| r.next_poll)
            .min();
        pending = sh.control.pop_until(&clock, &parker, deadline);
    }
    sh.control_done.store(true, Ordering::SeqCst);
    for _ in 0..sh.config.processing_slots {
        sh.jobs.push(&clock, JobMsg::Shutdown);
    }
    sh.wake_all();
}

/// Polls every idle shard whose poll time has come; dispatches non-empty
/// batches and parks shards that stayed idle long enough.
fn poll_due(
    sh: &Shared,
    clock: &Clock,
    shards: &mut BTreeMap<ShardRef, Running>,
    rng: &mut ChaCha8Rng,
    now: Duration,
    p: Duration,
) -> Result<(), WorkerError> {
    let due: Vec<ShardRef> = shards
        .iter()
        .filter(|(_, r)| r.actors.is_some() && r.next_poll <= now)
        .map(|(s, _)| s.clone())
        .collect();
    for shard in due {
        let envelopes = match protocol::poll_inbox(&sh.store, &shard) {
            Ok(e) => e,
            Err(WorkerError::Killed) => return Err(WorkerError::Killed),
            Err(_) => continue,
        };
        let r = shards.get_mut(&shard).expect("due shard present");
        if r.phased {
            while r.next_poll <= now {
                r.next_poll += p;
            }
        } else {
            // Random phase so that shards do not poll in lockstep.
            r.next_poll = now + p.mul_f64(rng.gen::<f64>());
            r.phased = true;
        }
        if !envelopes.is_empty() {
            r.last_activity = now;
            let actors = r.actors.take().expect("idle shard has its actors");
            sh.busy_jobs.fetch_add(1, Ordering::SeqCst);
            sh.jobs.push(
                clock,
                JobMsg::Run(Job {
                    epoch: r.epoch,
                    shard,
                    envelopes,
                    actors,
                    enqueued_at: now,
                }),
            );
        } else if now.saturating_sub(r.last_activity) >= sh.config.park_after_idle {
            let r = shards.remove(&shard).expect("present");
            sh.active.fetch_sub(1, Ordering::SeqCst);
            sh.log(EventKind::Parked { shard: shard.clone() });
            sh.parking
                .push(clock, ParkingMsg::Park(shard, r.epoch, r.actors.expect("idle")));
            sh.pull_wake.notify(clock);
        }
    }
    Ok(())
}

/// Releases shards when batches wait too long for an executor: half of the
/// idle ones, at least one. The claim target drops to what is left and
/// recovers by one per window once waits are short again.
fn rebalance(
    sh: &Shared,
    shards: &mut BTreeMap<ShardRef, Running>,
    waits: &mut VecDeque<Duration>,
    last_change: &mut Duration,
    now: Duration,
) {
    let threshold = sh.config.release_queue_threshold;
    if waits.len() < 4 || now.saturating_sub(*last_change) < threshold {
        return;
    }
    let mean = waits.iter().sum::<Duration>() / waits.len() as u32;
    let cap = sh.active_cap.load(Ordering::SeqCst);
    if mean > threshold && shards.len() > 1 {
        let idle: Vec<(ShardRef, i64)> = shards
            .iter()
            .filter(|(_, r)| r.actors.is_some())
            .map(|(s, r)| (s.clone(), r.epoch))
            .collect();
        let count = idle.len().div_ceil(2).min(shards.len() - 1);
        for (shard, epoch) in idle.into_iter().take(count) {
            if let Ok(ours) = protocol::release(&sh.store, Fence::new(sh.id(), epoch), &shard) {
                shards.remove(&shard);
                sh.active.fetch_sub(1, Ordering::SeqCst);
                sh.disown(&shard);
                if ours {
                    sh.log(EventKind::Released { shard });
                }
            }
        }
        sh.active_cap.store(shards.len().max(1), Ordering::SeqCst);
        *last_change = now;
        waits.clear();
    } else if mean < threshold / 2 && cap < sh.config.max_active_shards {
        sh.active_cap.store(cap + 1, Ordering::SeqCst);
        *last_change = now;
    }
}

fn executor(sh: Arc<Shared>) {
    let clock = sh.clock().clone();
    let parker = Parker::new();
    loop {
        if sh.killed() {
            return;
        }
        let job = match sh.jobs.pop_until(&clock, &parker, None) {
            Some(JobMsg::Run(job)) => job,
            Some(JobMsg::Shutdown) => return,
            None => continue,
        };
        let queue_wait = clock.now().saturating_sub(job.enqueued_at);
        let mut actors = job.actors;
        let mut fenced = false;
        let processor = sh.processor();
        for env in &job.envelopes {
            match processor.process_and_commit(&mut actors, env, job.epoch) {
                Ok(Processed::Fenced) => {
                    fenced = true;
                    break;
                }
                Ok(_) => {}
                Err(_) => return,
            }
        }
        sh.control.push(
            &clock,
            ControlMsg::Done {
                shard: job.shard,
                actors,
                fenced,
                queue_wait,
            },
        );
        sh.busy_jobs.fetch_sub(1, Ordering::SeqCst);
    }
}

fn pulling_station(sh: Arc<Shared>) {
    let clock = sh.clock().clone();
    let parker = Parker::new();
    loop {
        if sh.killed() || sh.stopping.load(Ordering::SeqCst) {
            return;
        }
        // Only claim while executors have spare capacity.
        let cap = sh.active_cap.load(Ordering::SeqCst);
        let spare = sh.config.processing_slots.saturating_sub(sh.busy_jobs.load(Ordering::SeqCst));
        let want = cap.saturating_sub(sh.active.load(Ordering::SeqCst)).min(spare);
        if want > 0 {
            match protocol::acquire(&sh.store, sh.id(), want) {
                Ok(claimed) => {
                    for (shard, epoch) in claimed {
                        sh.active.fetch_add(1, Ordering::SeqCst);
                        sh.owned().insert(shard.clone());
                        sh.control.push(&clock, ControlMsg::Claimed(shard, epoch));
                    }
                }
                Err(WorkerError::Killed) => return,
                Err(_) => {}
            }
        }
        let deadline = clock.now() + sh.config.polling_interval;
        while clock.now() < deadline {
            if sh.killed() || sh.stopping.load(Ordering::SeqCst) {
                return;
            }
            if sh.pull_wake.pop_until(&clock, &parker, Some(deadline)).is_some() {
                break;
            }
        }
    }
}

struct Parked {
    epoch: i64,
    actors: Actors,
    since: Duration,
    next_poll: Duration,
}

fn parking_station(sh: Arc<Shared>) {
    let clock = sh.clock().clone();
    let parker = Parker::new();
    let every = sh.config.parked_polling_interval();
    let mut parked: BTreeMap<ShardRef, Parked> = BTreeMap::new();
    let mut pending: Option<ParkingMsg> = None;
    loop {
        if sh.killed() {
            return;
        }
        let mut release_all = false;
        while let Some(m) = pending.take().or_else(|| sh.parking.try_pop()) {
            let now = clock.now();
            match m {
                ParkingMsg::Park(shard, epoch, actors) => {
                    parked.insert(
                        shard,
                        Parked {
                            epoch,
                            actors,
                            since: now,
                            next_poll: now + every,
                        },
                    );
                }
                ParkingMsg::ReleaseAll => release_all = true,
            }
        }
        if release_all {
            for (shard, p) in &parked {
                if let Ok(true) = protocol::release(&sh.store, Fence::new(sh.id(), p.epoch), shard) {
                    sh.log(EventKind::Released { shard: shard.clone() });
                }
                sh.disown(shard);
            }
            return;
        }
        let now = clock.now();
        let due: Vec<ShardRef> = parked
            .iter()
            .filter(|(_, p)| p.next_poll <= now)
            .map(|(s, _)| s.clone())
            .collect();
        for shard in due {
            let has_mail = match protocol::inbox_empty(&sh.store, &shard) {
                Ok(empty) => !empty,
                Err(WorkerError::Killed) => return,
                Err(_) => continue,
            };
            let p = parked.get_mut(&shard).expect("due");
            if has_mail {
                let p = parked.remove(&shard).expect("due");
                sh.log(EventKind::Unparked { shard: shard.clone() });
                sh.control
                    .push(&clock, ControlMsg::Unparked(shard, p.epoch, p.actors));
            } else if now.saturating_sub(p.since) >= sh.config.parking_threshold {
                sh.log(EventKind::PassivationStarted { shard: shard.clone() });
                match protocol::passivate(&sh.store, Fence::new(sh.id(), p.epoch), &shard) {
                    Ok(Passivation::Passive) => {
                        parked.remove(&shard);
                        sh.disown(&shard);
                        sh.log(EventKind::Passivated { shard });
                    }
                    Ok(Passivation::Aborted) => {
                        let p = parked.remove(&shard).expect("due");
                        sh.log(EventKind::PassivationAborted { shard: shard.clone() });
                        sh.control
                            .push(&clock, ControlMsg::Unparked(shard, p.epoch, p.actors));
                    }
                    Ok(Passivation::Lost) => {
                        parked.remove(&shard);
                        sh.disown(&shard);
                        sh.log(EventKind::Fenced { shard });
                    }
                    Err(WorkerError::Killed) => return,
                    Err(_) => {}
                }
            } else {
                while p.next_poll <= now {
                    p.next_poll += every;
                }
            }
        }
        if sh.stopping.load(Ordering::SeqCst) && sh.control_done.load(Ordering::SeqCst) && pending.is_none() {
            // The shard station already exited; nothing else will arrive.
            if sh.parking.is_empty() && parked.is_empty() {
                return;
            }
        }
        let deadline = parked.values().map(|p| p.next_poll).min();
        pending = sh.parking.pop_until(&clock, &parker, deadline);
    }
}

fn heartbeat_station(sh: Arc<Shared>) {
    let clock = sh.clock().clone();
    let parker = Parker::new();
    let lease = sh.config.lease_duration.as_millis() as u64;
    loop {
        if sh.killed() {
            return;
        }
        if sh.control_done.load(Ordering::SeqCst) && sh.stopping.load(Ordering::SeqCst) {
            let _ = sh
                .store
                .write(WriteAction::delete(tables::WORKER_LEASE, WorkerLeaseRecord::key(sh.id())));
            sh.log(EventKind::Stopped);
            return;
        }
        let now = clock.now_millis();
        if let Err(WorkerError::Killed) = protocol::heartbeat(&sh.store, sh.id(), now) {
            return;
        }
        match protocol::reclaim_expired(&sh.store, sh.id(), clock.now_millis(), lease) {
            Ok(list) => {
                if !list.is_empty() {
                    for (shard, from) in list {
                        sh.log(EventKind::Reclaimed { shard, from });
                    }
                    sh.pull_wake.notify(&clock);
                }
            }
            Err(WorkerError::Killed) => return,
            Err(_) => {}
        }
        let deadline = clock.now() + sh.config.heartbeat_interval;
        while clock.now() < deadline {
            if sh.killed() || (sh.control_done.load(Ordering::SeqCst) && sh.stopping.load(Ordering::SeqCst)) {
                break;
            }
            sh.heartbeat_wake.pop_until(&clock, &parker, Some(deadline));
        }
    }
}

fn fxhash(s: &str) -> u64 {
    s.bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}
