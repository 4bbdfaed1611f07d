use super::episode::{Episode, EpisodeHeader, RecordError};
use crate::robot::EmbodimentSpec;
use crate::sim::{state_hash, TaskSpec, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Divergence {
    pub tick: u64,
    pub expected: u64,
    pub actual: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub ticks: u64,
    pub final_hash: u64,
    /// footer hash, when the episode has a footer
    pub expected_hash: Option<u64>,
    pub first_divergence: Option<Divergence>,
    pub success: bool,
}

impl ReplayOutcome {
    /// True when every tick and the footer hash agree.
    pub fn matches(&self) -> bool {
        self.first_divergence.is_none() && self.expected_hash.is_none_or(|h| h == self.final_hash)
    }
}

/// Embodiment, task and initial world stored in an episode header.
pub fn episode_world(h: &EpisodeHeader) -> Result<(EmbodimentSpec, TaskSpec, WorldState), RecordError> {
    let spec = EmbodimentSpec::from_toml(&h.embodiment_toml)?;
    let task = TaskSpec::from_toml(&h.task_toml)?;
    let world = task.initial_state(&spec, h.seed);
    Ok((spec, task, world))
}

/// Feeds the recorded commands through the robot interface and simulator
/// and compares world hashes tick by tick.
pub fn replay(ep: &Episode) -> Result<ReplayOutcome, RecordError> {
    let (spec, task, mut world) = episode_world(&ep.header)?;
    let dt = 1.0 / ep.header.tick_rate;
    let mut first_divergence = None;
    for rec in &ep.records {
        world.apply(&spec, &rec.command, &ep.header.ik, dt)?;
        let actual = state_hash(&world);
        if first_divergence.is_none() && actual != rec.state_hash {
            first_divergence = Some(Divergence {
                tick: rec.tick,
                expected: rec.state_hash,
                actual,
            });
        }
    }
    Ok(ReplayOutcome {
        ticks: ep.records.len() as u64,
        final_hash: state_hash(&world),
        expected_hash: ep.footer.map(|f| f.final_hash),
        first_divergence,
        success: task.check(&world).success,
    })
}
