//! Single-hop latency against the polling interval. A message waits on
//! average half an interval before its shard is polled, then takes one
//! processing step.

use std::time::Duration;

use serverless_actors::harness::ChaosSchedule;
use serverless_actors::scenarios::{run, Banking, BankingParams, ScenarioSpec};
use serverless_actors::txkv::FaultPlan;
use serverless_actors::worker::WorkerConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>6} {:>10} {:>10} {:>10}", "p ms", "mean ms", "p/2 + t", "p95 ms");
    for p in [100u64, 500, 1000] {
        let spec = ScenarioSpec {
            requests: 300,
            workers: 2,
            arrival_rate: 5.0,
            worker: WorkerConfig {
                polling_interval: Duration::from_millis(p),
                processing_cost: Duration::from_millis(10),
                park_after_idle: Duration::from_secs(30),
                ..WorkerConfig::default()
            },
            chaos: ChaosSchedule {
                faults: FaultPlan::disabled().with_latency(Duration::from_millis(1), Duration::from_millis(3)),
                ..ChaosSchedule::none()
            },
            ..ScenarioSpec::default()
        };
        let r = run(&spec, &mut Banking::new(BankingParams { banks: 1, ..BankingParams::default() }))?;
        let s = r.summary();
        println!(
            "{p:>6} {:>10.1} {:>10.1} {:>10.1}",
            s.latency_ms.mean,
            p as f64 / 2.0 + s.service_ms.mean,
            s.latency_ms.p95
        );
    }
    Ok(())
}
