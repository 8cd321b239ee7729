//! Hotel bookings: user to hotel to user to the client. Prints the time
//! from the user's first processing to the reply next to p + 3t, the two
//! polling waits between actors plus three processing steps.

use std::time::Duration;

use serverless_actors::scenarios::{run, HotelParams, HotelScenario, ScenarioSpec};
use serverless_actors::worker::WorkerConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ScenarioSpec {
        requests: 500,
        workers: 2,
        arrival_rate: 5.0,
        worker: WorkerConfig {
            polling_interval: Duration::from_millis(500),
            processing_cost: Duration::from_millis(20),
            // Keep shards on the fast polling cadence for the whole run.
            park_after_idle: Duration::from_secs(30),
            ..WorkerConfig::default()
        },
        ..ScenarioSpec::default()
    };
    let report = run(&spec, &mut HotelScenario::new(HotelParams::default()))?;
    print!("{}", report.summary_table());
    let s = report.summary();
    println!(
        "two hops: {:.1} ms measured, {:.1} ms expected",
        s.processing_ms.mean,
        500.0 + 3.0 * s.service_ms.mean
    );
    Ok(())
}
