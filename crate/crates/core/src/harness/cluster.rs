use std::time::Duration;

use crate::model::tables;
use crate::txkv::Query;
use crate::worker::{Hooks, Runtime, Worker, WorkerConfig};

use super::chaos::ChaosAction;
use super::report::FaultEvent;
use super::HarnessError;

/// A set of workers started from one configuration template.
pub struct Cluster {
    rt: Runtime,
    template: WorkerConfig,
    hooks: Hooks,
    live: Vec<Worker>,
    retired: Vec<Worker>,
    paused: Vec<(String, Duration)>,
    started: usize,
    faults: Vec<FaultEvent>,
}

impl Cluster {
    pub fn new(rt: Runtime, template: WorkerConfig, hooks: Hooks) -> Self {
        Cluster {
            rt,
            template,
            hooks,
            live: Vec::new(),
            retired: Vec::new(),
            paused: Vec::new(),
            started: 0,
            faults: Vec::new(),
        }
    }

    pub fn runtime(&self) -> &Runtime {
        &self.rt
    }

    /// Starts a worker named `w{n}`.
    pub fn spawn(&mut self) -> Result<String, HarnessError> {
        self.started += 1;
        let mut cfg = self.template.clone();
        cfg.worker_id = format!("w{}", self.started);
        cfg.seed = self.template.seed.wrapping_add(self.started as u64);
        let w = Worker::start_with_hooks(&self.rt, cfg, self.hooks.clone())?;
        let id = w.id().to_string();
        self.live.push(w);
        Ok(id)
    }

    pub fn start(&mut self, n: usize) -> Result<(), HarnessError> {
        for _ in 0..n {
            self.spawn()?;
        }
        Ok(())
    }

    pub fn live_ids(&self) -> Vec<String> {
        self.live.iter().map(|w| w.id().to_string()).collect()
    }

    pub fn faults(&self) -> &[FaultEvent] {
        &self.faults
    }

    fn log(&mut self, kind: &str, worker_id: &str) {
        self.faults.push(FaultEvent {
            at_millis: self.rt.store.clock().now_millis(),
            kind: kind.to_string(),
            worker_id: worker_id.to_string(),
        });
    }

    pub fn kill(&mut self, pick: u64) -> Option<String> {
        if self.live.is_empty() {
            return None;
        }
        let w = self.live.remove((pick % self.live.len() as u64) as usize);
        w.kill();
        let id = w.id().to_string();
        self.paused.retain(|(p, _)| *p != id);
        self.retired.push(w);
        self.log("kill", &id);
        Some(id)
    }

    pub fn pause(&mut self, pick: u64, duration: Duration) -> Option<String> {
        let now = self.rt.store.clock().now();
        let candidates: Vec<usize> = (0..self.live.len())
            .filter(|i| !self.paused.iter().any(|(p, _)| p == self.live[*i].id()))
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let i = candidates[(pick % candidates.len() as u64) as usize];
        self.live[i].pause();
        let id = self.live[i].id().to_string();
        self.paused.push((id.clone(), now + duration));
        self.log("pause", &id);
        Some(id)
    }

    pub fn apply(&mut self, action: ChaosAction) -> Result<(), HarnessError> {
        match action {
            ChaosAction::Kill { pick } => {
                self.kill(pick);
            }
            ChaosAction::Respawn => {
                let id = self.spawn()?;
                self.log("respawn", &id);
            }
            ChaosAction::Pause { pick, duration } => {
                self.pause(pick, duration);
            }
        }
        Ok(())
    }

    /// Earliest pending resume.
    pub fn next_resume(&self) -> Option<Duration> {
        self.paused.iter().map(|(_, t)| *t).min()
    }

    /// Resumes every worker whose pause has run out.
    pub fn tick(&mut self) {
        let now = self.rt.store.clock().now();
        let due: Vec<String> = self
            .paused
            .iter()
            .filter(|(_, t)| *t <= now)
            .map(|(id, _)| id.clone())
            .collect();
        for id in due {
            self.paused.retain(|(p, _)| *p != id);
            if let Some(w) = self.live.iter().find(|w| w.id() == id) {
                w.resume();
            }
            self.log("resume", &id);
        }
    }

    /// Inboxes empty, no task records and no live worker busy.
    pub fn quiescent_now(&self) -> bool {
        let store = &self.rt.store;
        let empty = |t: &str| store.scan(t).map(|v| v.is_empty()).unwrap_or(false);
        self.paused.is_empty()
            && self.live.iter().all(Worker::is_idle)
            && empty(tables::ACTOR_INBOX)
            && empty(tables::ACTOR_TASK)
    }

    /// Waits until the system has been quiescent for two polling intervals.
    /// Keeps resuming paused workers meanwhile.
    pub fn await_quiescence(&mut self, timeout: Duration) -> bool {
        let clock = self.rt.store.clock().clone();
        let step = self.template.polling_interval;
        let deadline = clock.now() + timeout;
        let mut streak = 0;
        while clock.now() < deadline {
            self.tick();
            if self.quiescent_now() {
                streak += 1;
                if streak > 2 {
                    return true;
                }
            } else {
                streak = 0;
            }
            clock.sleep(step);
        }
        false
    }

    /// Number of envelopes still in any inbox.
    pub fn pending_envelopes(&self) -> usize {
        self.rt.store.scan(tables::ACTOR_INBOX).map(|v| v.len()).unwrap_or(0)
    }

    pub fn owned_by(&self, worker_id: &str) -> usize {
        let q = Query::index(tables::ACTOR_TASK, tables::ACTOR_TASK_BY_WORKER, worker_id);
        self.rt.store.query(&q).map(|v| v.len()).unwrap_or(0)
    }

    /// Stops every live worker gracefully and waits for all threads.
    pub fn shutdown(mut self) -> Vec<FaultEvent> {
        for w in &self.live {
            if w.is_killed() {
                continue;
            }
            w.resume();
            w.request_stop();
        }
        for w in self.live.drain(..).chain(self.retired.drain(..)) {
            w.join();
        }
        self.faults
    }
}
