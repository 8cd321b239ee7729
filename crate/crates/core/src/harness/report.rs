use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use serde::Serialize;

use super::oracles::Verdict;

/// One completed request. Times are store-clock milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub correlation_id: String,
    pub injected_at: u64,
    /// First time a worker started processing the request envelope.
    pub started_at: Option<u64>,
    pub completed_at: u64,
}

impl Sample {
    /// Injection to outbox record.
    pub fn latency_ms(&self) -> u64 {
        self.completed_at.saturating_sub(self.injected_at)
    }

    /// Time the request sat in the inbox before first being processed.
    pub fn polling_wait_ms(&self) -> Option<u64> {
        self.started_at.map(|s| s.saturating_sub(self.injected_at))
    }

    /// First processing start to outbox record.
    pub fn processing_ms(&self) -> Option<u64> {
        self.started_at.map(|s| self.completed_at.saturating_sub(s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FaultEvent {
    pub at_millis: u64,
    pub kind: String,
    pub worker_id: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Stats {
        if values.is_empty() {
            return Stats::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        };
        // Nearest-rank percentile.
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        Stats {
            count: n,
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            p95: v[rank - 1],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub requests: usize,
    pub completed: usize,
    pub latency_ms: Stats,
    pub polling_wait_ms: Stats,
    pub processing_ms: Stats,
    /// Per message: start of the attempt that committed to its commit.
    pub service_ms: Stats,
    /// Completed requests per second between the first injection and the
    /// last completion.
    pub throughput: f64,
    pub all_passed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub seed: u64,
    pub workers: usize,
    pub polling_interval_ms: u64,
    pub requests: usize,
    pub samples: Vec<Sample>,
    /// Completions per one-second bucket since the first injection.
    pub throughput: Vec<u64>,
    pub service_ms: Stats,
    pub verdicts: Vec<Verdict>,
    pub faults: Vec<FaultEvent>,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line<'a> {
    Run {
        scenario: &'a str,
        seed: u64,
        workers: usize,
        polling_interval_ms: u64,
        requests: usize,
    },
    Sample {
        #[serde(flatten)]
        sample: &'a Sample,
        latency_ms: u64,
        polling_wait_ms: Option<u64>,
        processing_ms: Option<u64>,
    },
    Throughput {
        second: usize,
        completed: u64,
    },
    Verdict(&'a Verdict),
    Fault(&'a FaultEvent),
    Summary(&'a Summary),
}

impl RunReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    /// Buckets completions into seconds counted from the first injection.
    pub fn fill_throughput(&mut self) {
        let Some(start) = self.samples.iter().map(|s| s.injected_at).min() else {
            self.throughput.clear();
            return;
        };
        let mut buckets: BTreeMap<usize, u64> = BTreeMap::new();
        for s in &self.samples {
            *buckets
                .entry((s.completed_at.saturating_sub(start) / 1000) as usize)
                .or_default() += 1;
        }
        let last = buckets.keys().next_back().copied().unwrap_or(0);
        self.throughput = (0..=last).map(|i| buckets.get(&i).copied().unwrap_or(0)).collect();
    }

    pub fn summary(&self) -> Summary {
        let f = |g: &dyn Fn(&Sample) -> Option<u64>| -> Vec<f64> {
            self.samples.iter().filter_map(g).map(|x| x as f64).collect()
        };
        let start = self.samples.iter().map(|s| s.injected_at).min();
        let end = self.samples.iter().map(|s| s.completed_at).max();
        let throughput = match (start, end) {
            (Some(a), Some(b)) if b > a => self.samples.len() as f64 * 1000.0 / (b - a) as f64,
            _ => 0.0,
        };
        Summary {
            requests: self.requests,
            completed: self.samples.len(),
            latency_ms: Stats::of(&f(&|s| Some(s.latency_ms()))),
            polling_wait_ms: Stats::of(&f(&|s| s.polling_wait_ms())),
            processing_ms: Stats::of(&f(&|s| s.processing_ms())),
            service_ms: self.service_ms,
            throughput,
            all_passed: self.all_passed(),
        }
    }

    /// Line-delimited JSON: a run header, then samples, throughput buckets,
    /// verdicts, faults and the summary.
    pub fn write_lines(&self, out: &mut impl Write) -> io::Result<()> {
        let summary = self.summary();
        let mut emit = |line: Line<'_>| -> io::Result<()> {
            serde_json::to_writer(&mut *out, &line)?;
            out.write_all(b"\n")
        };
        emit(Line::Run {
            scenario: &self.scenario,
            seed: self.seed,
            workers: self.workers,
            polling_interval_ms: self.polling_interval_ms,
            requests: self.requests,
        })?;
        for s in &self.samples {
            emit(Line::Sample {
                sample: s,
                latency_ms: s.latency_ms(),
                polling_wait_ms: s.polling_wait_ms(),
                processing_ms: s.processing_ms(),
            })?;
        }
        for (second, completed) in self.throughput.iter().enumerate() {
            emit(Line::Throughput {
                second,
                completed: *completed,
            })?;
        }
        for v in &self.verdicts {
            emit(Line::Verdict(v))?;
        }
        for f in &self.faults {
            emit(Line::Fault(f))?;
        }
        emit(Line::Summary(&summary))
    }

    pub fn to_lines(&self) -> String {
        let mut buf = Vec::new();
        self.write_lines(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn summary_table(&self) -> String {
        let s = self.summary();
        let mut t = String::new();
        let _ = writeln!(
            t,
            "{} seed={} workers={} p={}ms completed={}/{}",
            self.scenario, self.seed, self.workers, self.polling_interval_ms, s.completed, s.requests
        );
        let _ = writeln!(t, "{:<18}{:>10}{:>10}{:>10}", "ms", "mean", "median", "p95");
        for (name, st) in [
            ("latency", s.latency_ms),
            ("polling wait", s.polling_wait_ms),
            ("processing", s.processing_ms),
            ("per message", s.service_ms),
        ] {
            let _ = writeln!(t, "{name:<18}{:>10.1}{:>10.1}{:>10.1}", st.mean, st.median, st.p95);
        }
        let _ = writeln!(t, "throughput        {:>10.2} req/s", s.throughput);
        for v in &self.verdicts {
            let _ = writeln!(t, "{:<4} {:<22} {}", if v.passed { "ok" } else { "FAIL" }, v.name, v.detail);
        }
        t
    }
}
