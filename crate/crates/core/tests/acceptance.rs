//! Acceptance run: one line per criterion, non-zero exit if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serverless_actors::harness::{ChaosSchedule, RunReport};
use serverless_actors::scenarios::{run, Banking, BankingParams, HotelParams, HotelScenario, ScenarioSpec};
use serverless_actors::worker::{Hooks, WorkerConfig};

use common::kv;

const AC1_SEEDS: u64 = 20;
const AC1_KILLS: usize = 5;
const AC1_STORE_FAILURE_P: f64 = 0.02;
const AC1_MAX_WALL_PER_SEED: Duration = Duration::from_secs(120);
const AC3_POLLING_MS: [u64; 3] = [100, 500, 1000];
const AC3_HOTEL_TOLERANCE: f64 = 0.15;
const AC4_MIN_2_OVER_1: f64 = 1.5;
const AC4_MIN_4_OVER_2: f64 = 1.3;
const AC5_TRIALS: usize = 10_000;
const AC6_SEEDS: u64 = 50;
const AC6_SENDERS: usize = 10;
const AC6_PER_SENDER: u64 = 100;
const AC7_SEEDS: u64 = 20;
const AC7_MIN_DETECTIONS: usize = 1;
const AC8_MAX_RETRIES: u32 = 3;

struct Line {
    id: u8,
    name: &'static str,
    passed: bool,
    detail: String,
}

fn chaos_worker() -> WorkerConfig {
    WorkerConfig {
        polling_interval: Duration::from_millis(100),
        lease_duration: Duration::from_secs(3),
        heartbeat_interval: Duration::from_secs(1),
        park_after_idle: Duration::from_secs(2),
        ..WorkerConfig::default()
    }
}

fn chaos_spec(seed: u64, hooks: Hooks, pauses: bool) -> ScenarioSpec {
    let mut chaos = ChaosSchedule::random_kills(seed, AC1_KILLS, Duration::from_secs(12), Duration::from_secs(1))
        .with_store_failures(AC1_STORE_FAILURE_P);
    if pauses {
        chaos = chaos.with_random_pauses(3, Duration::from_secs(8), Duration::from_secs(5));
    }
    ScenarioSpec {
        requests: 600,
        workers: 4,
        seed,
        worker: chaos_worker(),
        chaos,
        hooks,
        ..ScenarioSpec::default()
    }
}

fn failing(r: &RunReport) -> Vec<String> {
    r.verdicts.iter().filter(|v| !v.passed).map(|v| format!("{}: {}", v.name, v.detail)).collect()
}

fn ac1() -> Line {
    let mut bad = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 0..AC1_SEEDS {
        let t = Instant::now();
        match run(&chaos_spec(seed, Hooks::default(), false), &mut Banking::new(BankingParams::default())) {
            Ok(r) => {
                let kills = r.faults.iter().filter(|f| f.kind == "kill").count();
                if kills != AC1_KILLS {
                    bad.push(format!("seed {seed}: {kills} kills"));
                }
                bad.extend(failing(&r).into_iter().map(|f| format!("seed {seed}: {f}")));
            }
            Err(e) => bad.push(format!("seed {seed}: {e}")),
        }
        slowest = slowest.max(t.elapsed());
    }
    if slowest > AC1_MAX_WALL_PER_SEED {
        bad.push(format!("slowest seed took {slowest:?}"));
    }
    Line {
        id: 1,
        name: "exactly-once under chaos",
        passed: bad.is_empty(),
        detail: if bad.is_empty() {
            format!("{AC1_SEEDS} seeds, 0 violations, slowest {:.1}s", slowest.as_secs_f64())
        } else {
            bad.join("; ")
        },
    }
}

fn ac2() -> Line {
    let (checked, v) = common::sealing_interleavings();
    Line {
        id: 2,
        name: "sealing interleavings",
        passed: v.is_empty(),
        detail: format!("{checked} interleavings, {} violations {}", v.len(), v.join("; ")),
    }
}

fn latency_spec(p_ms: u64) -> ScenarioSpec {
    ScenarioSpec {
        requests: 600,
        workers: 2,
        seed: 3,
        arrival_rate: 5.0,
        worker: WorkerConfig {
            polling_interval: Duration::from_millis(p_ms),
            processing_cost: Duration::from_millis(10),
            park_after_idle: Duration::from_secs(30),
            ..WorkerConfig::default()
        },
        chaos: ChaosSchedule {
            faults: serverless_actors::txkv::FaultPlan::disabled()
                .with_latency(Duration::from_millis(1), Duration::from_millis(3)),
            ..ChaosSchedule::none()
        },
        ..ScenarioSpec::default()
    }
}

fn ac3() -> Line {
    let mut parts = Vec::new();
    let mut passed = true;
    for p_ms in AC3_POLLING_MS {
        let p = p_ms as f64;
        let bank = run(
            &latency_spec(p_ms),
            &mut Banking::new(BankingParams {
                banks: 1,
                ..BankingParams::default()
            }),
        );
        let hotel = run(
            &ScenarioSpec {
                requests: 500,
                ..latency_spec(p_ms)
            },
            &mut HotelScenario::new(HotelParams::default()),
        );
        let (bank, hotel) = match (bank, hotel) {
            (Ok(b), Ok(h)) => (b, h),
            (b, h) => {
                passed = false;
                parts.push(format!("p={p_ms}: {:?} {:?}", b.err(), h.err()));
                continue;
            }
        };
        let (bs, hs) = (bank.summary(), hotel.summary());
        let t = bs.service_ms.mean;
        let (lo, hi) = (p / 2.0 + t, p / 2.0 + t + p / 10.0);
        let bank_ok = bs.latency_ms.mean >= lo && bs.latency_ms.mean <= hi && bank.all_passed();
        let th = hs.service_ms.mean;
        let model = p + 3.0 * th;
        // Two hops between actors: from the user's first processing start
        // to the reply, leaving out the client-to-inbox detection wait.
        let ratio = hs.processing_ms.mean / model;
        let hotel_ok = (ratio - 1.0).abs() <= AC3_HOTEL_TOLERANCE && hotel.all_passed();
        passed &= bank_ok && hotel_ok;
        parts.push(format!(
            "p={p_ms}: banking {:.1} in [{lo:.1}, {hi:.1}] {}, hotel {:.1} vs {model:.1} ({ratio:.3}) {}",
            bs.latency_ms.mean,
            if bank_ok { "ok" } else { "FAIL" },
            hs.processing_ms.mean,
            if hotel_ok { "ok" } else { "FAIL" },
        ));
    }
    Line {
        id: 3,
        name: "latency model",
        passed,
        detail: parts.join("; "),
    }
}

fn ac4() -> Line {
    let mut tp = Vec::new();
    let mut bad = Vec::new();
    for workers in [1usize, 2, 4] {
        let spec = ScenarioSpec {
            requests: 600,
            workers,
            seed: 11,
            arrival_rate: 0.0,
            worker: WorkerConfig {
                polling_interval: Duration::from_millis(100),
                processing_cost: Duration::from_millis(20),
                release_queue_threshold: Duration::from_millis(500),
                ..WorkerConfig::default()
            },
            ..ScenarioSpec::default()
        };
        match run(&spec, &mut Banking::new(BankingParams::default())) {
            Ok(r) => {
                bad.extend(failing(&r));
                tp.push(r.summary().throughput);
            }
            Err(e) => {
                bad.push(e.to_string());
                tp.push(0.0);
            }
        }
    }
    let (r21, r42) = (tp[1] / tp[0], tp[2] / tp[1]);
    Line {
        id: 4,
        name: "strong scaling",
        passed: bad.is_empty() && r21 >= AC4_MIN_2_OVER_1 && r42 >= AC4_MIN_4_OVER_2,
        detail: format!(
            "req/s {:.1} / {:.1} / {:.1}, 2:1 {r21:.2} (>= {AC4_MIN_2_OVER_1}), 4:2 {r42:.2} (>= {AC4_MIN_4_OVER_2}) {}",
            tp[0],
            tp[1],
            tp[2],
            bad.join("; ")
        ),
    }
}

fn ac5() -> Line {
    let mut parts = Vec::new();
    let mut passed = true;
    let mut note = |name: &str, (n, v): (usize, Vec<String>)| {
        passed &= v.is_empty() && n >= AC5_TRIALS;
        parts.push(format!("{name} {n} checked, {} violations", v.len()));
    };
    let mut lin = (0, Vec::new());
    for seed in 0..10 {
        let (n, v) = kv::linearizability(seed, AC5_TRIALS / 10);
        lin.0 += n;
        lin.1.extend(v);
    }
    note("linearizability", lin);
    note("atomic visibility", kv::atomic_visibility(5, AC5_TRIALS));
    note("single winner", kv::single_winner(AC5_TRIALS, 4));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut idx = (0, Vec::new());
    for _ in 0..AC5_TRIALS {
        let len = rand::Rng::gen_range(&mut rng, 0..40);
        if let Err(e) = kv::index_matches_scan(&kv::random_mutations(&mut rng, len)) {
            idx.1.push(e);
        }
        idx.0 += 1;
    }
    note("index vs scan", idx);
    Line {
        id: 5,
        name: "store correctness",
        passed,
        detail: parts.join(", "),
    }
}

fn ac6() -> Line {
    let mut bad = Vec::new();
    for seed in 0..AC6_SEEDS {
        let seen = common::fifo_run(seed, AC6_SENDERS, AC6_PER_SENDER);
        if seen.len() != AC6_SENDERS {
            bad.push(format!("seed {seed}: {} senders seen", seen.len()));
        }
        for (sender, seqs) in &seen {
            if *seqs != (0..AC6_PER_SENDER).collect::<Vec<_>>() {
                bad.push(format!("seed {seed}: {sender} delivered {} out of order or incomplete", seqs.len()));
            }
        }
    }
    Line {
        id: 6,
        name: "FIFO per channel",
        passed: bad.is_empty(),
        detail: format!(
            "{AC6_SEEDS} seeds x {AC6_SENDERS} senders x {AC6_PER_SENDER}, {} violations {}",
            bad.len(),
            bad.join("; ")
        ),
    }
}

fn ac7() -> Line {
    let hooks = Hooks {
        disable_fencing: true,
    };
    let mut detected = Vec::new();
    let mut errors = Vec::new();
    for seed in 0..AC7_SEEDS {
        match run(&chaos_spec(seed, hooks.clone(), true), &mut Banking::new(BankingParams::default())) {
            Ok(r) if !r.all_passed() => {
                let names: Vec<String> = r.verdicts.iter().filter(|v| !v.passed).map(|v| v.name.clone()).collect();
                detected.push(format!("seed {seed} [{}]", names.join(",")));
            }
            Ok(_) => {}
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    Line {
        id: 7,
        name: "oracle sensitivity",
        passed: detected.len() >= AC7_MIN_DETECTIONS,
        detail: format!(
            "fencing off: {} of {AC7_SEEDS} seeds flagged {} {}",
            detected.len(),
            detected.join(" "),
            errors.join("; ")
        ),
    }
}

fn ac8() -> Line {
    let (events, dead, state) = common::poison_run(AC8_MAX_RETRIES);
    let attempts = events
        .iter()
        .filter(|e| {
            matches!(&e.kind, serverless_actors::worker::EventKind::ProcessingStarted { unique_id, .. } if unique_id == "s2")
        })
        .count();
    let passed = dead.len() == 1
        && dead[0].attempts == AC8_MAX_RETRIES
        && attempts == AC8_MAX_RETRIES as usize
        && state.done == [0, 1, 3, 4, 5];
    Line {
        id: 8,
        name: "poison message liveness",
        passed,
        detail: format!(
            "{} dead letters, {attempts} attempts (max {AC8_MAX_RETRIES}), later steps processed {:?}",
            dead.len(),
            state.done
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [fn() -> Line; 8] = [ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8];
    let mut all = true;
    for c in criteria {
        let t = Instant::now();
        let l = c();
        all &= l.passed;
        println!(
            "AC{} {} {} ({:.1}s): {}",
            l.id,
            if l.passed { "PASS" } else { "FAIL" },
            l.name,
            t.elapsed().as_secs_f64(),
            l.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
