use std::fmt;

use serde::{Deserialize, Serialize};

use super::pose::DeltaPose;

/// Planar base velocity in the robot base frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BaseVelocity {
    /// forward, m/s
    pub vx: f64,
    /// lateral (left positive), m/s
    pub vy: f64,
    /// yaw rate, rad/s
    pub wz: f64,
}

impl BaseVelocity {
    pub const ZERO: BaseVelocity = BaseVelocity {
        vx: 0.0,
        vy: 0.0,
        wz: 0.0,
    };

    pub fn new(vx: f64, vy: f64, wz: f64) -> Self {
        Self { vx, vy, wz }
    }

    /// Clamps each component to the given limits.
    pub fn clamped(&self, limits: &BaseLimits) -> Self {
        Self {
            vx: clamp_sym(self.vx, limits.max_linear),
            vy: clamp_sym(self.vy, limits.max_linear),
            wz: clamp_sym(self.wz, limits.max_angular),
        }
    }
}

fn clamp_sym(v: f64, limit: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-limit, limit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseLimits {
    /// m/s, applied to each linear component
    pub max_linear: f64,
    /// rad/s
    pub max_angular: f64,
}

impl Default for BaseLimits {
    fn default() -> Self {
        Self {
            max_linear: 1.0,
            max_angular: 1.5,
        }
    }
}

/// Left or right side of a bimanual robot (or operator).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// Controllable body parts of a mobile manipulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    LeftArm,
    RightArm,
    LeftGripper,
    RightGripper,
    Base,
    Torso,
}

impl Part {
    pub const ALL: [Part; 6] = [
        Part::LeftArm,
        Part::RightArm,
        Part::LeftGripper,
        Part::RightGripper,
        Part::Base,
        Part::Torso,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Part::LeftArm => "left_arm",
            Part::RightArm => "right_arm",
            Part::LeftGripper => "left_gripper",
            Part::RightGripper => "right_gripper",
            Part::Base => "base",
            Part::Torso => "torso",
        }
    }

    pub fn from_name(s: &str) -> Option<Part> {
        Part::ALL.into_iter().find(|p| p.name() == s)
    }

    pub fn arm(side: Side) -> Part {
        match side {
            Side::Left => Part::LeftArm,
            Side::Right => Part::RightArm,
        }
    }

    pub fn gripper(side: Side) -> Part {
        match side {
            Side::Left => Part::LeftGripper,
            Side::Right => Part::RightGripper,
        }
    }

    pub(crate) fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A value together with the identifier of the device that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagged<T> {
    pub value: T,
    pub source: String,
}

impl<T> Tagged<T> {
    pub fn new(value: T, source: impl Into<String>) -> Self {
        Self {
            value,
            source: source.into(),
        }
    }
}

/// The unified action command. Each field is optional; a present field always
/// carries the id of the device that produced it.
///
/// Arm deltas are expressed in the robot base frame at command time.
/// Grippers are targets in `[0, 1]` with 1 = closed; torso is a normalized
/// height target in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActionCommand {
    pub left_arm: Option<Tagged<DeltaPose>>,
    pub right_arm: Option<Tagged<DeltaPose>>,
    pub left_gripper: Option<Tagged<f64>>,
    pub right_gripper: Option<Tagged<f64>>,
    pub base: Option<Tagged<BaseVelocity>>,
    pub torso: Option<Tagged<f64>>,
    /// monotonic microseconds
    pub timestamp_us: u64,
}

impl ActionCommand {
    pub fn empty(timestamp_us: u64) -> Self {
        Self {
            timestamp_us,
            ..Default::default()
        }
    }

    pub fn arm(&self, side: Side) -> Option<&Tagged<DeltaPose>> {
        match side {
            Side::Left => self.left_arm.as_ref(),
            Side::Right => self.right_arm.as_ref(),
        }
    }

    pub fn arm_mut(&mut self, side: Side) -> &mut Option<Tagged<DeltaPose>> {
        match side {
            Side::Left => &mut self.left_arm,
            Side::Right => &mut self.right_arm,
        }
    }

    pub fn gripper(&self, side: Side) -> Option<&Tagged<f64>> {
        match side {
            Side::Left => self.left_gripper.as_ref(),
            Side::Right => self.right_gripper.as_ref(),
        }
    }

    pub fn gripper_mut(&mut self, side: Side) -> &mut Option<Tagged<f64>> {
        match side {
            Side::Left => &mut self.left_gripper,
            Side::Right => &mut self.right_gripper,
        }
    }

    pub fn has(&self, part: Part) -> bool {
        self.source_of(part).is_some()
    }

    pub fn source_of(&self, part: Part) -> Option<&str> {
        match part {
            Part::LeftArm => self.left_arm.as_ref().map(|t| t.source.as_str()),
            Part::RightArm => self.right_arm.as_ref().map(|t| t.source.as_str()),
            Part::LeftGripper => self.left_gripper.as_ref().map(|t| t.source.as_str()),
            Part::RightGripper => self.right_gripper.as_ref().map(|t| t.source.as_str()),
            Part::Base => self.base.as_ref().map(|t| t.source.as_str()),
            Part::Torso => self.torso.as_ref().map(|t| t.source.as_str()),
        }
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

    pub fn is_empty(&self) -> bool {
        Part::ALL.iter().all(|p| !self.has(*p))
    }

    /// Presence bitmask, one bit per [`Part`] in declaration order.
    pub fn presence(&self) -> u8 {
        Part::ALL
            .iter()
            .filter(|p| self.has(**p))
            .fold(0, |m, p| m | p.bit())
    }
}
