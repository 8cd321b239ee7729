use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::txkv::FaultPlan;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaosAction {
    /// Kills the live worker at `pick % live`.
    Kill { pick: u64 },
    /// Starts a fresh worker.
    Respawn,
    /// Freezes the live worker at `pick % live` for `duration`.
    Pause { pick: u64, duration: Duration },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChaosEvent {
    /// Offset from the start of the load.
    pub at: Duration,
    pub action: ChaosAction,
}

/// Worker faults plus store faults for one run. Everything is derived from
/// the seed and the static event list, so a schedule replays identically.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosSchedule {
    pub seed: u64,
    pub events: Vec<ChaosEvent>,
    pub faults: FaultPlan,
}

impl Default for ChaosSchedule {
    fn default() -> Self {
        ChaosSchedule::none()
    }
}

impl ChaosSchedule {
    pub fn none() -> Self {
        ChaosSchedule {
            seed: 0,
            events: Vec::new(),
            faults: FaultPlan::disabled(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty() && !self.faults.enabled
    }

    /// `kills` kills at uniform times within `horizon`, each followed by a
    /// respawn after `respawn_after`.
    pub fn random_kills(seed: u64, kills: usize, horizon: Duration, respawn_after: Duration) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ChaosSchedule {
            seed,
            ..ChaosSchedule::none()
        };
        for _ in 0..kills {
            let at = horizon.mul_f64(rng.gen::<f64>());
            s.push(at, ChaosAction::Kill { pick: rng.gen() });
            s.push(at + respawn_after, ChaosAction::Respawn);
        }
        s
    }

    /// Adds `pauses` freezes of `duration` at uniform times within `horizon`.
    pub fn with_random_pauses(mut self, pauses: usize, horizon: Duration, duration: Duration) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        for _ in 0..pauses {
            let at = horizon.mul_f64(rng.gen::<f64>());
            self.push(at, ChaosAction::Pause { pick: rng.gen(), duration });
        }
        self
    }

    pub fn with_store_failures(mut self, probability: f64) -> Self {
        self.faults = FaultPlan::failures(self.seed, probability);
        self
    }

    /// Parses `count@millis` entries separated by commas, e.g. `2@3000,1@8000`.
    /// Each killed worker is replaced after `respawn_after`.
    pub fn parse_kills(seed: u64, spec: &str, respawn_after: Duration) -> Result<Self, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ChaosSchedule {
            seed,
            ..ChaosSchedule::none()
        };
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let bad = || HarnessError::Config(format!("bad kill entry {part:?}, expected count@millis"));
            let (count, at) = part.split_once('@').ok_or_else(bad)?;
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            let at: u64 = at.trim().parse().map_err(|_| bad())?;
            let at = Duration::from_millis(at);
            for _ in 0..count {
                s.push(at, ChaosAction::Kill { pick: rng.gen() });
                s.push(at + respawn_after, ChaosAction::Respawn);
            }
        }
        Ok(s)
    }

    fn push(&mut self, at: Duration, action: ChaosAction) {
        self.events.push(ChaosEvent { at, action });
        // Stable: events at the same time keep insertion order.
        self.events.sort_by_key(|e| e.at);
    }

    pub fn kill_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.action, ChaosAction::Kill { .. }))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_schedule() {
        let h = Duration::from_secs(60);
        let a = ChaosSchedule::random_kills(7, 5, h, Duration::from_secs(1)).with_store_failures(0.02);
        let b = ChaosSchedule::random_kills(7, 5, h, Duration::from_secs(1)).with_store_failures(0.02);
        assert_eq!(a, b);
        assert_eq!(a.kill_count(), 5);
        assert_eq!(a.events.len(), 10);
        assert!(a.events.windows(2).all(|w| w[0].at <= w[1].at));
        assert_ne!(a, ChaosSchedule::random_kills(8, 5, h, Duration::from_secs(1)).with_store_failures(0.02));
    }

    #[test]
    fn parse_kill_list() {
        let s = ChaosSchedule::parse_kills(1, "2@3000, 1@8000", Duration::from_millis(500)).unwrap();
        assert_eq!(s.kill_count(), 3);
        assert_eq!(s.events[0].at, Duration::from_millis(3000));
        assert_eq!(s.events.last().unwrap().at, Duration::from_millis(8500));
        assert!(ChaosSchedule::parse_kills(1, "", Duration::ZERO).unwrap().is_empty());
        for bad in ["3", "x@1", "1@", "1@-5"] {
            assert!(ChaosSchedule::parse_kills(1, bad, Duration::ZERO).is_err(), "{bad}");
        }
    }
}
