use std::time::Duration;

use super::WorkerError;

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerConfig {
    pub worker_id: String,
    pub polling_interval: Duration,
    /// Running shards this worker tries to keep; parked ones do not count.
    pub max_active_shards: usize,
    pub processing_slots: usize,
    /// Time a shard must sit idle before it is parked.
    pub park_after_idle: Duration,
    /// Time a parked shard waits before passivation starts.
    pub parking_threshold: Duration,
    pub lease_duration: Duration,
    pub heartbeat_interval: Duration,
    /// Total attempts for a message whose handler fails.
    pub max_message_retries: u32,
    pub release_queue_threshold: Duration,
    /// Simulated handler cost charged before each message.
    pub processing_cost: Duration,
    /// Seed for poll phases.
    pub seed: u64,
}

impl Default for WorkerConfig {
    fn default() -> Self {
        WorkerConfig {
            worker_id: "worker-0".into(),
            polling_interval: Duration::from_millis(500),
            max_active_shards: 16,
            processing_slots: 2,
            park_after_idle: Duration::from_secs(2),
            parking_threshold: Duration::from_secs(10),
            lease_duration: Duration::from_secs(10),
            heartbeat_interval: Duration::from_secs(2),
            max_message_retries: 3,
            release_queue_threshold: Duration::from_secs(5),
            processing_cost: Duration::ZERO,
            seed: 0,
        }
    }
}

impl WorkerConfig {
    pub fn named(worker_id: &str) -> Self {
        WorkerConfig {
            worker_id: worker_id.to_string(),
            ..WorkerConfig::default()
        }
    }

    /// Poll interval of parked shards.
    pub fn parked_polling_interval(&self) -> Duration {
        self.polling_interval * 4
    }

    pub fn validate(&self) -> Result<(), WorkerError> {
        let bad = |m: &str| Err(WorkerError::Config(m.to_string()));
        if self.worker_id.is_empty() {
            return bad("worker_id must be non-empty");
        }
        if self.polling_interval.is_zero() {
            return bad("polling_interval must be positive");
        }
        if self.processing_slots == 0 {
            return bad("processing_slots must be at least 1");
        }
        if self.max_active_shards == 0 {
            return bad("max_active_shards must be at least 1");
        }
        if self.max_message_retries == 0 {
            return bad("max_message_retries must be at least 1");
        }
        if self.heartbeat_interval.is_zero() || self.heartbeat_interval * 2 >= self.lease_duration {
            return bad("heartbeat_interval must be positive and below lease_duration / 2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = WorkerConfig::default();
        c.validate().unwrap();
        assert_eq!(c.polling_interval, Duration::from_millis(500));
        assert_eq!(c.parking_threshold, Duration::from_secs(10));
        assert_eq!(c.max_message_retries, 3);
        assert_eq!(c.parked_polling_interval(), Duration::from_secs(2));
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let c = WorkerConfig {
            polling_interval: Duration::ZERO,
            ..WorkerConfig::default()
        };
        assert!(c.validate().is_err());
        let c = WorkerConfig {
            heartbeat_interval: Duration::from_secs(5),
            ..WorkerConfig::default()
        };
        assert!(c.validate().is_err());
        let c = WorkerConfig {
            processing_slots: 0,
            ..WorkerConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
