use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatencyError {
    #[error("expected 'base_ms,jitter_ms[,drop[,seed]]', got '{0}'")]
    Syntax(String),
    #[error("{field} must be non-negative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("drop probability must be in [0, 1], got {0}")]
    DropProbability(f64),
}

/// Per-message delay `base ± U(jitter)` and independent drops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    pub base_delay_ms: f64,
    /// half-width of the uniform jitter
    pub jitter_ms: f64,
    pub drop_probability: f64,
    pub seed: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self::NONE
    }
}

impl LatencyModel {
    pub const NONE: LatencyModel = LatencyModel {
        base_delay_ms: 0.0,
        jitter_ms: 0.0,
        drop_probability: 0.0,
        seed: 0,
    };

    pub fn new(base_delay_ms: f64, jitter_ms: f64, drop_probability: f64, seed: u64) -> Result<Self, LatencyError> {
        let m = Self {
            base_delay_ms,
            jitter_ms,
            drop_probability,
            seed,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), LatencyError> {
        for (field, value) in [("base delay", self.base_delay_ms), ("jitter", self.jitter_ms)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(LatencyError::Negative { field, value });
            }
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(LatencyError::DropProbability(self.drop_probability));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.base_delay_ms == 0.0 && self.jitter_ms == 0.0 && self.drop_probability == 0.0
    }

    /// The same model with a different seed, for the other direction of a link.
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

impl FromStr for LatencyModel {
    type Err = LatencyError;

    /// `base_ms,jitter_ms[,drop[,seed]]`
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || LatencyError::Syntax(s.to_string());
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if !(2..=4).contains(&parts.len()) {
            return Err(syntax());
        }
        let num = |i: usize| parts[i].parse::<f64>().map_err(|_| syntax());
        let base = num(0)?;
        let jitter = num(1)?;
        let drop = if parts.len() > 2 { num(2)? } else { 0.0 };
        let seed = match parts.get(3) {
            Some(p) => p.parse::<u64>().map_err(|_| syntax())?,
            None => 0,
        };
        Self::new(base, jitter, drop, seed)
    }
}

impl fmt::Display for LatencyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{}",
            self.base_delay_ms, self.jitter_ms, self.drop_probability, self.seed
        )
    }
}

/// Delays messages in one direction. Delivery times never decrease, so
/// messages leave in the order they entered.
pub struct LatencyInjector<T> {
    model: LatencyModel,
    rng: ChaCha8Rng,
    queue: VecDeque<(u64, T)>,
    last_delivery_us: u64,
    dropped: u64,
}

impl<T> LatencyInjector<T> {
    pub fn new(model: LatencyModel) -> Self {
        Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            queue: VecDeque::new(),
            last_delivery_us: 0,
            dropped: 0,
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Sampled one-way delay in microseconds, never negative.
    fn sample_delay_us(&mut self) -> u64 {
        let m = &self.model;
        let jitter = if m.jitter_ms > 0.0 {
            self.rng.random_range(-m.jitter_ms..=m.jitter_ms)
        } else {
            0.0
        };
        ((m.base_delay_ms + jitter) * 1e3).round().max(0.0) as u64
    }

    /// Enqueues a message sent at `now_us`; returns false when it was dropped.
    pub fn push(&mut self, now_us: u64, msg: T) -> bool {
        // draw the drop decision first so the delay sequence does not depend
        // on which messages were kept
        let drop = self.model.drop_probability > 0.0 && self.rng.random::<f64>() < self.model.drop_probability;
        let delay = self.sample_delay_us();
        if drop {
            self.dropped += 1;
            return false;
        }
        let due = (now_us + delay).max(self.last_delivery_us);
        self.last_delivery_us = due;
        self.queue.push_back((due, msg));
        true
    }

    /// Delivery time of the oldest queued message.
    pub fn next_due(&self) -> Option<u64> {
        self.queue.front().map(|(t, _)| *t)
    }

    /// Removes and returns every message due at or before `now_us`.
    pub fn pop_due(&mut self, now_us: u64) -> Vec<(u64, T)> {
        let mut out = Vec::new();
        while self.queue.front().is_some_and(|(t, _)| *t <= now_us) {
            out.extend(self.queue.pop_front());
        }
        out
    }
}

/// Applies the model to a whole timestamped stream. Returns
/// `(delivery_us, message)` pairs in order.
pub fn inject_latency<T>(stream: impl IntoIterator<Item = (u64, T)>, model: LatencyModel) -> Vec<(u64, T)> {
    let mut inj = LatencyInjector::new(model);
    for (t, m) in stream {
        inj.push(t, m);
    }
    inj.pop_due(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stream(n: u64) -> Vec<(u64, u64)> {
        (0..n).map(|i| (i * 50_000, i)).collect()
    }

    #[test]
    fn zero_model_is_identity() {
        assert_eq!(inject_latency(stream(100), LatencyModel::NONE), stream(100));
    }

    #[test]
    fn full_drop_empties_stream() {
        let m = LatencyModel::new(10.0, 0.0, 1.0, 1).unwrap();
        assert!(inject_latency(stream(100), m).is_empty());
    }

    #[test]
    fn parses_cli_form() {
        let m: LatencyModel = "150,50,0.01,7".parse().unwrap();
        assert_eq!(m, LatencyModel::new(150.0, 50.0, 0.01, 7).unwrap());
        assert_eq!("150,50".parse::<LatencyModel>().unwrap().seed, 0);
        assert!("150".parse::<LatencyModel>().is_err());
        assert!("150,50,2".parse::<LatencyModel>().is_err());
        assert!("-1,0".parse::<LatencyModel>().is_err());
    }

    #[test]
    fn same_seed_same_schedule() {
        let m = LatencyModel::new(150.0, 50.0, 0.1, 42).unwrap();
        assert_eq!(inject_latency(stream(500), m), inject_latency(stream(500), m));
        assert_ne!(inject_latency(stream(500), m), inject_latency(stream(500), m.with_seed(43)));
    }

    proptest! {
        #[test]
        fn never_reorders(base in 0.0..300.0f64, jitter in 0.0..200.0f64, drop in 0.0..0.5f64, seed: u64) {
            let m = LatencyModel::new(base, jitter, drop, seed).unwrap();
            let out = inject_latency(stream(300), m);
            for w in out.windows(2) {
                prop_assert!(w[0].1 < w[1].1);
                prop_assert!(w[0].0 <= w[1].0);
            }
            for (due, i) in &out {
                prop_assert!(*due >= i * 50_000);
            }
        }
    }
}
