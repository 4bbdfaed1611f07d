//! Sessions: configuration, the operator and robot ends, and the local,
//! serve and connect runners.

mod config;
mod operator;
mod report;
mod robot;
mod run;

use std::time::Duration;

pub use config::{ConfigError, DeviceKind, DeviceSpec, Overrides, SessionConfig, DEFAULT_ENDPOINT};
pub use operator::{Operator, Script};
pub use report::{LatencyStats, SessionReport};
pub use robot::{episode_header, RobotOutcome, RobotSide};
pub use run::{bind, run_connect, run_local, run_serve, ServeOptions};

use crate::channel::LinkError;
use crate::record::RecordError;
use crate::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Record(#[from] RecordError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("no operator connected within {0:?}")]
    NoOperator(Duration),
    #[error("connection to the robot closed before the session finished")]
    Disconnected,
}

impl SessionError {
    /// Process exit code: 2 for configuration and file problems, 3 for
    /// connection failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SessionError::Link(_) | SessionError::NoOperator(_) | SessionError::Disconnected => 3,
            _ => 2,
        }
    }
}
