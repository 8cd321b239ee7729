//! External client, fault injection, correctness oracles and run reports.

mod chaos;
mod client;
mod cluster;
pub mod oracles;
mod report;

pub use chaos::{ChaosAction, ChaosEvent, ChaosSchedule};
pub use client::{decode_response, Client, ClientRequest, Injection};
pub use cluster::Cluster;
pub use oracles::Verdict;
pub use report::{FaultEvent, RunReport, Sample, Stats, Summary};

use thiserror::Error;

use crate::model::ModelError;
use crate::txkv::KvError;
use crate::worker::WorkerError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no response for {0} before the timeout")]
    Timeout(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] KvError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Worker(#[from] WorkerError),
}
