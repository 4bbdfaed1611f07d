use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Observed one-way latency samples in microseconds.
#[derive(Debug, Clone, Default)]
pub struct LatencyStats {
    samples: Vec<u64>,
}

impl LatencyStats {
    pub fn add(&mut self, us: u64) {
        self.samples.push(us);
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_ms(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        Some(self.samples.iter().map(|&s| s as f64).sum::<f64>() / self.samples.len() as f64 / 1e3)
    }

    /// Nearest-rank 95th percentile.
    pub fn p95_ms(&self) -> Option<f64> {
        if self.samples.is_empty() {
            return None;
        }
        let mut s = self.samples.clone();
        s.sort_unstable();
        let rank = (0.95 * s.len() as f64).ceil() as usize;
        Some(s[rank.clamp(1, s.len()) - 1] as f64 / 1e3)
    }
}

/// Summary of one session, written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub mode: String,
    pub task: String,
    pub embodiment: String,
    pub success: bool,
    /// sim seconds until the task succeeded, absent on failure
    pub completion_time_s: Option<f64>,
    pub ticks: u64,
    pub sim_time_s: f64,
    pub wall_time_s: f64,
    pub messages_sent: u64,
    pub messages_received: u64,
    pub mean_latency_ms: Option<f64>,
    pub p95_latency_ms: Option<f64>,
    pub rtt_ms: Option<f64>,
    /// frames lost to corruption, queue overflow or injected drops
    pub dropped_frames: u64,
    /// commands discarded for going back in time
    pub stale_commands: u64,
    /// ticks on which a commanded part was removed because the embodiment
    /// lacks it
    pub filtered_parts: u64,
    /// world hash after the last tick, hex
    pub final_hash: Option<String>,
    pub record: Option<PathBuf>,
    /// the peer went away before the task ended
    pub disconnected: bool,
}

impl SessionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// `episode.tmep` gets `episode.report.json`.
    pub fn path_for(record: &Path) -> PathBuf {
        record.with_extension("report.json")
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }
}
