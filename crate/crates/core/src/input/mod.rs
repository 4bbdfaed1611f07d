//! Device parsers that turn raw input events into partial action commands,
//! and the compositor that merges them by body-part assignment.
//!
//! Every parser follows the same contract: events are fed through
//! [`Parser::handle`] as they arrive and [`Parser::tick`] is called once per
//! control tick. Given the same state and events a parser always produces
//! the same output, which keeps recorded sessions replayable.

mod composite;
mod config;
mod event;
mod keyboard;
mod sixdof;
mod vision;
mod vr;

use std::collections::BTreeSet;

pub use composite::{composite_merge, Assignment};
pub use config::{ArmAxis, Dof, InputConfigError, KeyBinding, Keymap, ParserConfig};
pub(crate) use event::clamp_axis;
pub use event::{
    read_events, write_events, EventFileError, EventPayload, InputEvent, KeypointConfidence,
    KeypointFrame,
};
pub use keyboard::KeyboardParser;
pub use sixdof::{SixDofMode, SixDofParser};
pub use vision::{VisionCalibration, VisionConfig, VisionParser};
pub use vr::{VrMapping, VrParser};

use crate::action::{BaseVelocity, DeltaPose, Part, Side};

/// The fields one parser produced during one tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartialCommand {
    pub device_id: String,
    pub left_arm: Option<DeltaPose>,
    pub right_arm: Option<DeltaPose>,
    pub left_gripper: Option<f64>,
    pub right_gripper: Option<f64>,
    pub base: Option<BaseVelocity>,
    pub torso: Option<f64>,
}

impl PartialCommand {
    pub fn empty(device_id: impl Into<String>) -> Self {
        Self {
            device_id: device_id.into(),
            ..Default::default()
        }
    }

    pub fn arm(&self, side: Side) -> Option<DeltaPose> {
        match side {
            Side::Left => self.left_arm,
            Side::Right => self.right_arm,
        }
    }

    pub fn gripper(&self, side: Side) -> Option<f64> {
        match side {
            Side::Left => self.left_gripper,
            Side::Right => self.right_gripper,
        }
    }

    pub fn arm_mut(&mut self, side: Side) -> &mut Option<DeltaPose> {
        match side {
            Side::Left => &mut self.left_arm,
            Side::Right => &mut self.right_arm,
        }
    }

    pub fn gripper_mut(&mut self, side: Side) -> &mut Option<f64> {
        match side {
            Side::Left => &mut self.left_gripper,
            Side::Right => &mut self.right_gripper,
        }
    }

    pub fn has(&self, part: Part) -> bool {
        match part {
            Part::LeftArm => self.left_arm.is_some(),
            Part::RightArm => self.right_arm.is_some(),
            Part::LeftGripper => self.left_gripper.is_some(),
            Part::RightGripper => self.right_gripper.is_some(),
            Part::Base => self.base.is_some(),
            Part::Torso => self.torso.is_some(),
        }
    }

    pub fn is_empty(&self) -> bool {
        Part::ALL.iter().all(|p| !self.has(*p))
    }

    pub fn clear(&mut self, part: Part) {
        match part {
            Part::LeftArm => self.left_arm = None,
            Part::RightArm => self.right_arm = None,
            Part::LeftGripper => self.left_gripper = None,
            Part::RightGripper => self.right_gripper = None,
            Part::Base => self.base = None,
            Part::Torso => self.torso = None,
        }
    }

    /// Drops every field outside `parts`.
    pub fn restrict(mut self, parts: &BTreeSet<Part>) -> Self {
        for p in Part::ALL {
            if !parts.contains(&p) {
                self.clear(p);
            }
        }
        self
    }
}

pub trait Parser: Send {
    fn device_id(&self) -> &str;

    fn handle(&mut self, event: &InputEvent);

    fn tick(&mut self, now_us: u64) -> PartialCommand;

    /// Informs the parser of the robot's current normalized torso height so
    /// that rate-style torso inputs integrate from the right starting point.
    fn set_torso_reference(&mut self, _normalized: f64) {}
}

/// A parser restricted to the parts it is configured to control.
pub struct DeviceParser {
    parser: Box<dyn Parser>,
    controls: BTreeSet<Part>,
}

impl DeviceParser {
    pub fn new(parser: Box<dyn Parser>, controls: impl IntoIterator<Item = Part>) -> Self {
        Self {
            parser,
            controls: controls.into_iter().collect(),
        }
    }

    pub fn controls(&self) -> &BTreeSet<Part> {
        &self.controls
    }
}

impl Parser for DeviceParser {
    fn device_id(&self) -> &str {
        self.parser.device_id()
    }

    fn handle(&mut self, event: &InputEvent) {
        self.parser.handle(event)
    }

    fn tick(&mut self, now_us: u64) -> PartialCommand {
        self.parser.tick(now_us).restrict(&self.controls)
    }

    fn set_torso_reference(&mut self, normalized: f64) {
        self.parser.set_torso_reference(normalized)
    }
}

/// Integrates a torso rate into a normalized target in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TorsoIntegrator {
    target: f64,
}

impl Default for TorsoIntegrator {
    fn default() -> Self {
        Self { target: 0.5 }
    }
}

impl TorsoIntegrator {
    pub fn set(&mut self, t: f64) {
        self.target = t.clamp(0.0, 1.0);
    }

    pub fn advance(&mut self, rate: f64, dt: f64) -> f64 {
        self.target = (self.target + rate * dt).clamp(0.0, 1.0);
        self.target
    }
}

/// Tick-to-tick elapsed seconds with a nominal fallback for the first tick.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct TickClock {
    last_us: Option<u64>,
}

impl TickClock {
    pub const NOMINAL_DT: f64 = 0.05;

    pub fn dt(&mut self, now_us: u64) -> f64 {
        let dt = match self.last_us {
            Some(prev) if now_us > prev => (now_us - prev) as f64 * 1e-6,
            Some(_) => 0.0,
            None => Self::NOMINAL_DT,
        };
        self.last_us = Some(now_us);
        dt
    }
}
