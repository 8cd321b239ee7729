//! Seeded fault decisions for the store.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultPlan {
    pub seed: u64,
    pub transient_failure_probability: f64,
    pub latency_min: Duration,
    pub latency_max: Duration,
    pub enabled: bool,
}

impl Default for FaultPlan {
    fn default() -> Self {
        FaultPlan::disabled()
    }
}

impl FaultPlan {
    pub fn disabled() -> Self {
        FaultPlan {
            seed: 0,
            transient_failure_probability: 0.0,
            latency_min: Duration::ZERO,
            latency_max: Duration::ZERO,
            enabled: false,
        }
    }

    pub fn failures(seed: u64, probability: f64) -> Self {
        FaultPlan {
            seed,
            transient_failure_probability: probability.clamp(0.0, 1.0),
            enabled: true,
            ..FaultPlan::disabled()
        }
    }

    pub fn with_latency(mut self, min: Duration, max: Duration) -> Self {
        self.latency_min = min;
        self.latency_max = max.max(min);
        self.enabled = true;
        self
    }
}

/// What the injector decided for one operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FaultDecision {
    pub latency: Duration,
    pub fail: bool,
}

/// Draws decisions from a ChaCha stream; two injectors built from the same
/// plan produce the same decisions for the same sequence of calls.
#[derive(Debug)]
pub struct FaultInjector {
    plan: FaultPlan,
    rng: ChaCha8Rng,
    injected: u64,
}

impl FaultInjector {
    pub fn new(plan: FaultPlan) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(plan.seed);
        FaultInjector {
            plan,
            rng,
            injected: 0,
        }
    }

    pub fn plan(&self) -> &FaultPlan {
        &self.plan
    }

    pub fn injected_failures(&self) -> u64 {
        self.injected
    }

    fn latency(&mut self) -> Duration {
        let (lo, hi) = (self.plan.latency_min, self.plan.latency_max);
        if hi <= lo {
            return lo;
        }
        let span = (hi - lo).as_nanos() as u64;
        lo + Duration::from_nanos(self.rng.gen_range(0..=span))
    }

    pub fn on_read(&mut self) -> FaultDecision {
        if !self.plan.enabled {
            return FaultDecision {
                latency: Duration::ZERO,
                fail: false,
            };
        }
        FaultDecision {
            latency: self.latency(),
            fail: false,
        }
    }

    pub fn on_write(&mut self) -> FaultDecision {
        if !self.plan.enabled {
            return FaultDecision {
                latency: Duration::ZERO,
                fail: false,
            };
        }
        let latency = self.latency();
        let fail = self.rng.gen_bool(self.plan.transient_failure_probability);
        if fail {
            self.injected += 1;
        }
        FaultDecision { latency, fail }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_decisions() {
        let plan = FaultPlan::failures(42, 0.3)
            .with_latency(Duration::from_micros(10), Duration::from_micros(90));
        let mut a = FaultInjector::new(plan.clone());
        let mut b = FaultInjector::new(plan);
        for i in 0..500 {
            if i % 3 == 0 {
                assert_eq!(a.on_read(), b.on_read());
            } else {
                assert_eq!(a.on_write(), b.on_write());
            }
        }
        assert_eq!(a.injected_failures(), b.injected_failures());
        assert!(a.injected_failures() > 0);
    }

    #[test]
    fn disabled_plan_never_fails() {
        let mut inj = FaultInjector::new(FaultPlan {
            transient_failure_probability: 1.0,
            ..FaultPlan::disabled()
        });
        assert!((0..100).all(|_| !inj.on_write().fail));
    }

    #[test]
    fn failure_rate_tracks_probability() {
        let mut inj = FaultInjector::new(FaultPlan::failures(7, 0.02));
        let n = 100_000;
        let fails = (0..n).filter(|_| inj.on_write().fail).count();
        let rate = fails as f64 / n as f64;
        assert!((rate - 0.02).abs() < 0.003, "rate {rate}");
    }
}
