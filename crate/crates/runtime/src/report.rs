//! Run statistics.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LatencySummary {
    pub samples: usize,
    pub p50_ms: f64,
    pub p90_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl LatencySummary {
    /// Nearest-rank percentiles.
    pub fn of(durations: &[Duration]) -> Self {
        if durations.is_empty() {
            return Self::default();
        }
        let mut ms: Vec<f64> = durations.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let rank = |p: f64| ms[((p * ms.len() as f64).ceil() as usize).clamp(1, ms.len()) - 1];
        Self {
            samples: ms.len(),
            p50_ms: rank(0.5),
            p90_ms: rank(0.9),
            p99_ms: rank(0.99),
            max_ms: ms[ms.len() - 1],
        }
    }
}

/// A stretch during which the sink refused messages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gap {
    /// Since the start of the run.
    pub start_ms: f64,
    pub duration_ms: f64,
    pub lost: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunReport {
    pub workers: usize,
    pub frames: usize,
    pub tracked: usize,
    /// Untracked frames by reason.
    pub rejected: BTreeMap<String, usize>,
    pub wall_seconds: f64,
    /// Frames per second from the first intake to the last release.
    pub fps: f64,
    /// Per processing stage, plus `end_to_end` (intake to in-order release)
    /// and `enqueue` (handing a message to the streamer).
    pub latency: BTreeMap<String, LatencySummary>,
    pub messages: usize,
    pub stale_messages: usize,
    pub sent: usize,
    /// Messages discarded because the streamer queue was full.
    pub dropped: usize,
    pub gaps: Vec<Gap>,
}

impl RunReport {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }
}
