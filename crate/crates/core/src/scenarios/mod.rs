//! Benchmark workloads and the driver that runs them against a cluster.

mod banking;
mod hotel;

pub use banking::{Account, Bank, Banking, BankingParams, Credit, Transfer, TransferResult};
pub use hotel::{
    BookRoom, BookingReply, Hotel, HotelParams, HotelScenario, Reservation, ReservationResult,
    RoomDay, User,
};

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::api::Registry;
use crate::clock::Clock;
use crate::harness::{oracles, ChaosSchedule, Client, ClientRequest, Cluster, HarnessError, RunReport, Sample, Stats, Verdict};
use crate::model::{tables, OutboxRecord, ShardPolicies};
use crate::txkv::{CommitRecord, FaultPlan, Snapshot, Store};
use crate::worker::{EventKind, Hooks, Runtime, WorkerConfig};

/// A benchmark application: actor types, initial data, requests and the
/// application-level oracles.
pub trait Workload {
    fn name(&self) -> &'static str;
    fn registry(&self) -> Registry;
    fn policies(&self) -> ShardPolicies;
    /// Writes initial actor states and items straight into the store.
    fn bootstrap(&mut self, rt: &Runtime) -> Result<(), HarnessError>;
    fn requests(&mut self, count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<ClientRequest>, HarnessError>;
    fn verdicts(&self, snapshot: &Snapshot, responses: &BTreeMap<String, OutboxRecord>) -> Vec<Verdict>;
}

/// One run: load shape, cluster shape and fault schedule.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub requests: usize,
    pub workers: usize,
    /// Template for every worker; ids are assigned by the cluster.
    pub worker: WorkerConfig,
    pub seed: u64,
    /// Requests per second; zero injects everything at once.
    pub arrival_rate: f64,
    pub chaos: ChaosSchedule,
    pub fake_clock: bool,
    pub hooks: Hooks,
    /// Upper bound on the drain phase after the last injection.
    pub quiescence_timeout: Duration,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            requests: 100,
            workers: 2,
            worker: WorkerConfig::default(),
            seed: 0,
            arrival_rate: 50.0,
            chaos: ChaosSchedule::none(),
            fake_clock: true,
            hooks: Hooks::default(),
            quiescence_timeout: Duration::from_secs(600),
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.workers == 0 {
            return Err(HarnessError::Config("at least one worker is required".into()));
        }
        if !(self.arrival_rate >= 0.0 && self.arrival_rate.is_finite()) {
            return Err(HarnessError::Config("arrival rate must be finite and non-negative".into()));
        }
        self.worker.validate()?;
        Ok(())
    }

    /// Injection offsets. Arrivals are one per 1/rate slot, placed within the
    /// slot by the golden-ratio sequence so phases relative to polling are
    /// spread evenly.
    pub fn arrivals(&self) -> Vec<Duration> {
        const PHI: f64 = 0.618_033_988_749_894_9;
        if self.arrival_rate == 0.0 {
            return vec![Duration::ZERO; self.requests];
        }
        (0..self.requests)
            .map(|i| {
                let jitter = (i as f64 * PHI + self.seed as f64 * PHI).fract();
                Duration::from_secs_f64((i as f64 + jitter) / self.arrival_rate)
            })
            .collect()
    }
}

enum Next {
    Inject(usize),
    Chaos(usize),
}

/// Runs `workload` under `spec` and evaluates every oracle.
pub fn run(spec: &ScenarioSpec, workload: &mut dyn Workload) -> Result<RunReport, HarnessError> {
    run_with_history(spec, workload).map(|(report, _)| report)
}

/// Like [`run`], also returning the store's commit history.
pub fn run_with_history(
    spec: &ScenarioSpec,
    workload: &mut dyn Workload,
) -> Result<(RunReport, Vec<CommitRecord>), HarnessError> {
    spec.validate()?;
    let clock = if spec.fake_clock {
        Clock::simulated()
    } else {
        Clock::real()
    };
    let _participant = clock.participate();
    let store = Store::new(clock.clone());
    store.record_history(true);
    let rt = Runtime::new(store, workload.registry(), workload.policies())?;
    workload.bootstrap(&rt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let requests = workload.requests(spec.requests, &mut rng)?;
    let expected: BTreeSet<String> = requests.iter().map(|r| r.correlation_id.clone()).collect();
    if expected.len() != requests.len() {
        return Err(HarnessError::Config("duplicate correlation ids".into()));
    }

    rt.store.set_fault_plan(spec.chaos.faults.clone());
    let client = Client::new(rt.store.clone());
    let mut template = spec.worker.clone();
    template.seed ^= spec.seed;
    let mut cluster = Cluster::new(rt.clone(), template, spec.hooks.clone());
    cluster.start(spec.workers)?;

    let start = clock.now();
    let arrivals = spec.arrivals();
    let chaos = &spec.chaos.events;
    let mut injected = BTreeMap::new();
    let (mut ri, mut ci) = (0, 0);
    loop {
        let next = match (arrivals.get(ri), chaos.get(ci)) {
            (None, None) => break,
            (Some(_), None) => Next::Inject(ri),
            (None, Some(_)) => Next::Chaos(ci),
            (Some(a), Some(c)) if c.at <= *a => Next::Chaos(ci),
            (Some(_), Some(_)) => Next::Inject(ri),
        };
        let due = start
            + match next {
                Next::Inject(i) => arrivals[i],
                Next::Chaos(i) => chaos[i].at,
            };
        loop {
            cluster.tick();
            let now = clock.now();
            if now >= due {
                break;
            }
            let wake = cluster.next_resume().map_or(due, |r| r.min(due)).max(now);
            clock.sleep((wake - now).max(Duration::from_micros(1)));
        }
        match next {
            Next::Inject(i) => {
                let inj = client.inject(&requests[i])?;
                injected.insert(inj.correlation_id.clone(), inj);
                ri += 1;
            }
            Next::Chaos(i) => {
                cluster.apply(chaos[i].action)?;
                ci += 1;
            }
        }
    }

    let quiesced = cluster.await_quiescence(spec.quiescence_timeout);
    let faults = cluster.shutdown();
    rt.store.set_fault_plan(FaultPlan::disabled());

    let snapshot = rt.store.snapshot();
    let history = rt.store.history();
    let responses: BTreeMap<String, OutboxRecord> = snapshot
        .items(tables::OUTBOX)
        .iter()
        .filter_map(|i| OutboxRecord::from_item(i).ok())
        .map(|r| (r.correlation_id.clone(), r))
        .collect();

    // The commit that wrote a response is when the output became visible.
    let mut produced: BTreeMap<String, u64> = BTreeMap::new();
    for c in &history {
        for w in c.writes.iter().filter(|w| w.table == tables::OUTBOX) {
            if let Some(cid) = w.key.partition_key.as_text() {
                produced.entry(cid.to_string()).or_insert(c.at_millis);
            }
        }
    }
    let mut started: BTreeMap<String, u64> = BTreeMap::new();
    let mut attempt: BTreeMap<String, u64> = BTreeMap::new();
    let mut service = Vec::new();
    for e in rt.events.events() {
        match e.kind {
            EventKind::ProcessingStarted { unique_id, .. } => {
                started.entry(unique_id.clone()).or_insert(e.at_millis);
                attempt.insert(unique_id, e.at_millis);
            }
            EventKind::Committed { unique_id, .. } => {
                if let Some(t) = attempt.remove(&unique_id) {
                    service.push(e.at_millis.saturating_sub(t) as f64);
                }
            }
            _ => {}
        }
    }
    let samples = requests
        .iter()
        .filter_map(|r| {
            let inj = injected.get(&r.correlation_id)?;
            let resp = responses.get(&r.correlation_id)?;
            Some(Sample {
                correlation_id: r.correlation_id.clone(),
                injected_at: inj.at_millis,
                started_at: started.get(&r.correlation_id).copied(),
                completed_at: produced.get(&r.correlation_id).copied().unwrap_or(resp.timestamp),
            })
        })
        .collect();

    let mut verdicts = oracles::standard(&history, &snapshot, &expected);
    if !quiesced {
        if let Some(v) = verdicts.iter_mut().find(|v| v.name == oracles::QUIESCENCE) {
            v.passed = false;
            v.detail = format!("not quiescent within {:?}; {}", spec.quiescence_timeout, v.detail);
        }
    }
    verdicts.extend(workload.verdicts(&snapshot, &responses));

    let mut report = RunReport {
        scenario: workload.name().to_string(),
        seed: spec.seed,
        workers: spec.workers,
        polling_interval_ms: spec.worker.polling_interval.as_millis() as u64,
        requests: requests.len(),
        samples,
        throughput: Vec::new(),
        service_ms: Stats::of(&service),
        verdicts,
        faults,
    };
    report.fill_throughput();
    Ok((report, history))
}

/// Items of one collection table in the snapshot, decoded.
pub(crate) fn snapshot_items<I: crate::api::QueryableItem>(snapshot: &Snapshot, table: &str) -> Vec<(String, I)> {
    snapshot
        .items(table)
        .iter()
        .filter_map(|item| {
            let rec = crate::model::CollectionItemRecord::from_item(item).ok()?;
            let value = crate::model::codec::decode(&rec.payload).ok()?;
            Some((rec.collection_id, value))
        })
        .collect()
}

/// Actor states of one type in the snapshot, decoded.
pub(crate) fn snapshot_actors<A: crate::api::Actor>(snapshot: &Snapshot) -> Vec<(crate::model::ActorId, A)> {
    snapshot
        .items(tables::ACTOR_STATE)
        .iter()
        .filter_map(|item| {
            let rec = crate::model::ActorStateRecord::from_item(item).ok()?;
            if rec.type_tag != A::TYPE_TAG {
                return None;
            }
            Some((rec.actor_id, crate::model::codec::decode(&rec.current_state).ok()?))
        })
        .collect()
}
