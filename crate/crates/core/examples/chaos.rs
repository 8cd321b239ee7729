//! Kills workers and fails store writes while transfers run. With fencing
//! the books balance; with the ownership check switched off a worker that
//! was frozen past its lease overwrites newer state and the oracles notice.

use std::time::Duration;

use serverless_actors::harness::ChaosSchedule;
use serverless_actors::scenarios::{run, Banking, BankingParams, ScenarioSpec};
use serverless_actors::worker::{Hooks, WorkerConfig};

fn spec(seed: u64, disable_fencing: bool) -> ScenarioSpec {
    ScenarioSpec {
        requests: 600,
        workers: 4,
        seed,
        worker: WorkerConfig {
            polling_interval: Duration::from_millis(100),
            lease_duration: Duration::from_secs(3),
            heartbeat_interval: Duration::from_secs(1),
            ..WorkerConfig::default()
        },
        chaos: ChaosSchedule::random_kills(seed, 5, Duration::from_secs(12), Duration::from_secs(1))
            .with_store_failures(0.02)
            .with_random_pauses(3, Duration::from_secs(8), Duration::from_secs(5)),
        hooks: Hooks { disable_fencing },
        ..ScenarioSpec::default()
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for fencing_off in [false, true] {
        println!("== fencing {}", if fencing_off { "off" } else { "on" });
        for seed in 0..4 {
            let r = run(&spec(seed, fencing_off), &mut Banking::new(BankingParams::default()))?;
            let failed: Vec<&str> = r.verdicts.iter().filter(|v| !v.passed).map(|v| v.name.as_str()).collect();
            println!("seed {seed}: {} faults, failed oracles {failed:?}", r.faults.len());
        }
    }
    Ok(())
}
