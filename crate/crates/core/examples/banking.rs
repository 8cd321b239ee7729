//! Desk-scale banking run: 600 transfers over 300 accounts held by ten
//! bank actors, two workers, with every oracle checked at the end.

use serverless_actors::scenarios::{run, Banking, BankingParams, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = ScenarioSpec {
        requests: 600,
        workers: 2,
        seed: 42,
        ..ScenarioSpec::default()
    };
    let report = run(&spec, &mut Banking::new(BankingParams::default()))?;
    print!("{}", report.summary_table());
    println!("first seconds of throughput: {:?}", &report.throughput[..report.throughput.len().min(5)]);
    Ok(())
}
