use std::path::PathBuf;

use super::config::SessionConfig;
use super::SessionError;
use crate::action::ActionCommand;
use crate::channel::{Consolidator, ObservationFrame};
use crate::record::{
    manifest_path, update_manifest, EpisodeFooter, EpisodeHeader, EpisodeRecord, EpisodeWriter, ManifestEntry,
};
use crate::robot::{EmbodimentSpec, FilterStats, IkParams};
use crate::sim::{state_hash, Renderer, TaskSpec, TaskStatus, WorldState};

/// Episode header for a session, embedding the task and embodiment so the
/// recording replays on its own.
pub fn episode_header(cfg: &SessionConfig, start_unix_ms: u64) -> EpisodeHeader {
    EpisodeHeader {
        task_name: cfg.task.name.clone(),
        embodiment_name: cfg.embodiment.name.clone(),
        config_digest: cfg.digest,
        tick_rate: cfg.tick_rate,
        start_unix_ms,
        seed: cfg.seed,
        ik: cfg.ik,
        task_toml: toml::to_string(&cfg.task).expect("task serializes"),
        embodiment_toml: toml::to_string(&cfg.embodiment).expect("embodiment serializes"),
    }
}

/// How a robot-side session ended.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotOutcome {
    pub ticks: u64,
    pub sim_time: f64,
    pub success: bool,
    pub completion_time: Option<f64>,
    pub final_hash: u64,
    pub stale_commands: u64,
    pub filtered_parts: u64,
    pub record: Option<PathBuf>,
}

/// The robot end of a session: consolidation, the robot interface and the
/// simulator, stepping once per control tick and recording every tick.
pub struct RobotSide {
    spec: EmbodimentSpec,
    task: TaskSpec,
    ik: IkParams,
    dt: f64,
    world: WorldState,
    renderer: Renderer,
    consolidator: Consolidator,
    writer: Option<(PathBuf, EpisodeWriter)>,
    tick: u64,
    filter: FilterStats,
    status: TaskStatus,
    completion: Option<f64>,
}

impl RobotSide {
    pub fn new(cfg: &SessionConfig, start_unix_ms: u64) -> Result<Self, SessionError> {
        let writer = match &cfg.record {
            Some(path) => {
                if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).map_err(|source| SessionError::Io {
                        path: dir.display().to_string(),
                        source,
                    })?;
                }
                Some((path.clone(), EpisodeWriter::create(path, &episode_header(cfg, start_unix_ms))?))
            }
            None => None,
        };
        Ok(Self {
            spec: cfg.embodiment.clone(),
            task: cfg.task.clone(),
            ik: cfg.ik,
            dt: cfg.dt(),
            world: cfg.task.initial_state(&cfg.embodiment, cfg.seed),
            renderer: Renderer::new(cfg.images),
            consolidator: Consolidator::new(cfg.consolidation),
            writer,
            tick: 0,
            filter: FilterStats::default(),
            status: TaskStatus {
                success: false,
                done: false,
            },
            completion: None,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn spec(&self) -> &EmbodimentSpec {
        &self.spec
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn status(&self) -> TaskStatus {
        self.status
    }

    pub fn torso_normalized(&self) -> f64 {
        self.world.joints.torso_normalized(&self.spec)
    }

    pub fn push(&mut self, cmd: &ActionCommand, received_us: u64) {
        self.consolidator.push(cmd, received_us);
    }

    /// Drops all pending commands; the next tick stops the base and opens
    /// the grippers.
    pub fn safety_stop(&mut self) {
        self.consolidator.reset();
    }

    pub fn observe(&mut self) -> ObservationFrame {
        self.renderer.render(&self.world, &self.spec)
    }

    /// One control tick at `now_us`. `obs` is the observation rendered
    /// before the step, stored with the tick's record.
    pub fn step(&mut self, now_us: u64, obs: &ObservationFrame) -> Result<TaskStatus, SessionError> {
        let torso = self.torso_normalized();
        let cmd = self.consolidator.consolidate(now_us, torso);
        let report = self.world.apply(&self.spec, &cmd, &self.ik, self.dt)?;
        self.filter.add(&report);
        if let Some((_, w)) = &mut self.writer {
            w.record_step(&EpisodeRecord::new(self.tick, state_hash(&self.world), cmd, obs))?;
        }
        self.tick += 1;
        self.status = self.task.check(&self.world);
        if self.status.success && self.completion.is_none() {
            self.completion = Some(self.world.sim_time);
        }
        Ok(self.status)
    }

    /// Writes the footer and the manifest line.
    pub fn finish(self) -> Result<RobotOutcome, SessionError> {
        let final_hash = state_hash(&self.world);
        let footer = EpisodeFooter {
            final_hash,
            success: self.status.success,
            tick_count: self.tick,
            sim_time: self.world.sim_time,
        };
        let record = match self.writer {
            Some((path, w)) => {
                w.finish(&footer)?;
                let entry = ManifestEntry {
                    file: path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                    task: self.task.name.clone(),
                    embodiment: self.spec.name.clone(),
                    ticks: self.tick,
                    success: footer.success,
                    final_hash,
                };
                update_manifest(&manifest_path(&path), entry)?;
                Some(path)
            }
            None => None,
        };
        Ok(RobotOutcome {
            ticks: self.tick,
            sim_time: self.world.sim_time,
            success: self.status.success,
            completion_time: self.completion,
            final_hash,
            stale_commands: self.consolidator.stale_dropped(),
            filtered_parts: self.filter.removed.iter().sum(),
            record,
        })
    }
}
