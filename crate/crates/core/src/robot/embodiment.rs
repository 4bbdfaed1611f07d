//! Embodiment description files (TOML).
//!
//! ```toml
//! name = "tiago-like"
//! base_type = "differential"          # or "omnidirectional"
//! base_limits = { max_linear = 0.5, max_angular = 1.0 }
//! footprint_radius = 0.3              # meters, used for rendering only
//!
//! [torso]                             # optional prismatic lift along +z
//! origin = { xyz = [0, 0, 0.6] }      # torso link at zero lift, base frame
//! range = [0.0, 0.35]
//! max_velocity = 0.1
//!
//! [[cameras]]
//! id = "head"
//! parent = "torso"                    # or "base"
//! origin = { xyz = [0.1, 0, 0.55], rpy = [0, 0.5, 0] }
//! width = 128
//! height = 128
//! vfov_deg = 60.0
//!
//! [right_arm]                         # and/or [left_arm]
//! mount = { xyz = [0.1, -0.2, 0.25] } # on the torso link (base if no torso)
//! tool = { xyz = [0.12, 0, 0] }       # last joint to tool center point
//! [[right_arm.joints]]
//! name = "r1"
//! type = "revolute"                   # or "prismatic"
//! axis = [0, 0, 1]
//! origin = { xyz = [0, 0, 0] }        # from the previous joint
//! limits = [-2.0, 2.0]
//! max_velocity = 1.5
//! ```
//!
//! Lengths are meters, angles radians (except `vfov_deg`), `rpy` is
//! extrinsic roll-pitch-yaw.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::action::{BaseLimits, Part, Pose, Side};

#[derive(Debug, thiserror::Error)]
pub enum EmbodimentError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("{context}: {problem}")]
    Invalid { context: String, problem: String },
    #[error("unknown embodiment '{0}' (bundled: tiago-like, fetch-like)")]
    Unknown(String),
}

fn invalid(context: impl Into<String>, problem: impl Into<String>) -> EmbodimentError {
    EmbodimentError::Invalid {
        context: context.into(),
        problem: problem.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Transform {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

impl Transform {
    pub fn pose(&self) -> Pose {
        Pose::from_xyz_rpy(self.xyz, self.rpy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: JointKind,
    pub axis: [f64; 3],
    #[serde(default)]
    pub origin: Transform,
    pub limits: [f64; 2],
    /// rad/s or m/s
    pub max_velocity: f64,
}

impl JointSpec {
    pub fn axis(&self) -> Vector3<f64> {
        Vector3::from(self.axis)
    }

    pub fn lo(&self) -> f64 {
        self.limits[0]
    }

    pub fn hi(&self) -> f64 {
        self.limits[1]
    }

    pub fn clamp(&self, q: f64) -> f64 {
        q.clamp(self.lo(), self.hi())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    #[serde(default)]
    pub mount: Transform,
    #[serde(default)]
    pub tool: Transform,
    pub joints: Vec<JointSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorsoSpec {
    #[serde(default)]
    pub origin: Transform,
    pub range: [f64; 2],
    pub max_velocity: f64,
}

impl TorsoSpec {
    /// Lift position for a normalized target in `[0, 1]`.
    pub fn position_for(&self, t: f64) -> f64 {
        let [lo, hi] = self.range;
        lo + t.clamp(0.0, 1.0) * (hi - lo)
    }

    pub fn normalized(&self, q: f64) -> f64 {
        let [lo, hi] = self.range;
        ((q - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Torso link pose in the base frame at lift `q`.
    pub fn link_pose(&self, q: f64) -> Pose {
        self.origin.pose().compose(&Pose::from_translation(0.0, 0.0, q))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseType {
    Differential,
    Omnidirectional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MountParent {
    Base,
    Torso,
}

/// Camera looking along its +x axis, y left, z up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraMount {
    pub id: String,
    pub parent: MountParent,
    #[serde(default)]
    pub origin: Transform,
    pub width: u32,
    pub height: u32,
    pub vfov_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbodimentSpec {
    pub name: String,
    pub base_type: BaseType,
    #[serde(default)]
    pub base_limits: BaseLimits,
    #[serde(default = "default_footprint")]
    pub footprint_radius: f64,
    #[serde(default)]
    pub torso: Option<TorsoSpec>,
    #[serde(default)]
    pub left_arm: Option<ArmSpec>,
    #[serde(default)]
    pub right_arm: Option<ArmSpec>,
    #[serde(default)]
    pub cameras: Vec<CameraMount>,
}

fn default_footprint() -> f64 {
    0.3
}

pub const TIAGO_LIKE: &str = include_str!("../../data/embodiments/tiago_like.toml");
pub const FETCH_LIKE: &str = include_str!("../../data/embodiments/fetch_like.toml");

impl EmbodimentSpec {
    pub fn from_toml(text: &str) -> Result<Self, EmbodimentError> {
        let spec: EmbodimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, EmbodimentError> {
        let text = std::fs::read_to_string(path).map_err(|source| EmbodimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// A bundled spec by name, or a path to a spec file.
    pub fn resolve(name_or_path: &str) -> Result<Self, EmbodimentError> {
        match name_or_path {
            "tiago-like" => Self::from_toml(TIAGO_LIKE),
            "fetch-like" => Self::from_toml(FETCH_LIKE),
            other if other.ends_with(".toml") || Path::new(other).exists() => Self::load(Path::new(other)),
            other => Err(EmbodimentError::Unknown(other.to_string())),
        }
    }

    pub fn tiago_like() -> Self {
        Self::from_toml(TIAGO_LIKE).expect("bundled spec is valid")
    }

    pub fn fetch_like() -> Self {
        Self::from_toml(FETCH_LIKE).expect("bundled spec is valid")
    }

    pub fn arm(&self, side: Side) -> Option<&ArmSpec> {
        match side {
            Side::Left => self.left_arm.as_ref(),
            Side::Right => self.right_arm.as_ref(),
        }
    }

    pub fn arms(&self) -> impl Iterator<Item = (Side, &ArmSpec)> {
        Side::BOTH.into_iter().filter_map(|s| self.arm(s).map(|a| (s, a)))
    }

    /// Whether the robot has hardware for the part.
    pub fn supports(&self, part: Part) -> bool {
        match part {
            Part::LeftArm | Part::LeftGripper => self.left_arm.is_some(),
            Part::RightArm | Part::RightGripper => self.right_arm.is_some(),
            Part::Torso => self.torso.is_some(),
            Part::Base => true,
        }
    }

    /// Arm root (first joint frame's parent) in the base frame at torso lift `torso_q`.
    pub fn arm_root(&self, side: Side, torso_q: f64) -> Option<Pose> {
        let arm = self.arm(side)?;
        let parent = match &self.torso {
            Some(t) => t.link_pose(torso_q),
            None => Pose::identity(),
        };
        Some(parent.compose(&arm.mount.pose()))
    }

    pub fn validate(&self) -> Result<(), EmbodimentError> {
        let ctx = &self.name;
        if self.left_arm.is_none() && self.right_arm.is_none() {
            return Err(invalid(ctx, "at least one arm is required"));
        }
        let l = &self.base_limits;
        if !(l.max_linear > 0.0 && l.max_angular > 0.0) {
            return Err(invalid(ctx, "base limits must be positive"));
        }
        if let Some(t) = &self.torso {
            if !(t.range[0] < t.range[1]) {
                return Err(invalid(format!("{ctx} torso"), format!("range {:?} needs lo < hi", t.range)));
            }
            if !(t.max_velocity > 0.0) {
                return Err(invalid(format!("{ctx} torso"), "max_velocity must be positive"));
            }
        }
        for (side, arm) in self.arms() {
            if arm.joints.is_empty() {
                return Err(invalid(format!("{ctx} {}", Part::arm(side)), "no joints"));
            }
            for j in &arm.joints {
                let jctx = format!("{ctx} joint '{}'", j.name);
                if !(j.lo() < j.hi()) {
                    return Err(invalid(jctx, format!("limits {:?} need lo < hi", j.limits)));
                }
                let n = j.axis().norm();
                if (n - 1.0).abs() > 1e-9 {
                    return Err(invalid(jctx, format!("axis norm is {n}, expected 1")));
                }
                if !(j.max_velocity > 0.0) {
                    return Err(invalid(jctx, "max_velocity must be positive"));
                }
            }
        }
        for c in &self.cameras {
            if c.width == 0 || c.height == 0 || !(c.vfov_deg > 0.0 && c.vfov_deg < 180.0) {
                return Err(invalid(format!("{ctx} camera '{}'", c.id), "bad resolution or field of view"));
            }
            if c.parent == MountParent::Torso && self.torso.is_none() {
                return Err(invalid(format!("{ctx} camera '{}'", c.id), "mounted on a missing torso"));
            }
        }
        Ok(())
    }
}
