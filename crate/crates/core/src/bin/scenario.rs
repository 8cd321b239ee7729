//! Runs one benchmark scenario and prints its summary.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, ValueEnum};
use serverless_actors::harness::ChaosSchedule;
use serverless_actors::scenarios::{run, Banking, BankingParams, HotelParams, HotelScenario, ScenarioSpec, Workload};
use serverless_actors::worker::WorkerConfig;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Name {
    Banking,
    Hotel,
}

#[derive(Debug, Parser)]
#[command(about = "Run a benchmark scenario against an in-process cluster and check every oracle")]
struct Args {
    #[arg(long, value_enum)]
    scenario: Name,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    /// Inbox polling interval; the reference settings are 100, 500 and 1000.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    polling_interval_ms: u64,
    /// Defaults to 600 for banking and 500 for hotel.
    #[arg(long)]
    requests: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker kills as `count@millis` entries, e.g. `2@3000,1@8000`.
    #[arg(long)]
    kill_workers: Option<String>,
    /// Where to write the JSON-lines report.
    #[arg(long)]
    report_path: Option<PathBuf>,
    /// Run on simulated time instead of the wall clock.
    #[arg(long)]
    fake_clock: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(args: &Args) -> Result<bool, Box<dyn std::error::Error>> {
    let chaos = match &args.kill_workers {
        Some(k) => ChaosSchedule::parse_kills(args.seed, k, Duration::from_secs(1))?,
        None => ChaosSchedule::none(),
    };
    let (mut workload, requests): (Box<dyn Workload>, usize) = match args.scenario {
        Name::Banking => (Box::new(Banking::new(BankingParams::default())), 600),
        Name::Hotel => (Box::new(HotelScenario::new(HotelParams::default())), 500),
    };
    let spec = ScenarioSpec {
        requests: args.requests.unwrap_or(requests),
        workers: args.workers,
        worker: WorkerConfig {
            polling_interval: Duration::from_millis(args.polling_interval_ms),
            lease_duration: Duration::from_secs(3),
            heartbeat_interval: Duration::from_secs(1),
            ..WorkerConfig::default()
        },
        seed: args.seed,
        chaos,
        fake_clock: args.fake_clock,
        ..ScenarioSpec::default()
    };
    let report = run(&spec, workload.as_mut())?;
    print!("{}", report.summary_table());
    if let Some(path) = &args.report_path {
        report.write_lines(&mut BufWriter::new(File::create(path)?))?;
    }
    Ok(report.all_passed())
}
