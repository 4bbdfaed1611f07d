use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::action::{BaseLimits, Part, Side};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InputConfigError {
    #[error("key '{0}' is bound more than once")]
    DuplicateKey(String),
    #[error("unknown degree of freedom '{0}'")]
    UnknownDof(String),
    #[error("{field} must be positive, got {value}")]
    NonPositiveGain { field: &'static str, value: f64 },
    #[error("smoothing factor must be in [0, 1], got {0}")]
    Smoothing(f64),
    #[error("{field} must be in [0, 1], got {value}")]
    OutOfUnitRange { field: &'static str, value: f64 },
    #[error("{part} is claimed by both '{first}' and '{second}'")]
    AmbiguousAssignment {
        part: Part,
        first: String,
        second: String,
    },
}

/// Tuning shared by all parsers. Gains are positive; `smoothing` is the
/// exponential smoothing factor α (1 = raw input, 0 = frozen).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParserConfig {
    /// arm translation gain (m per m for tracked devices, m per tick at full
    /// deflection for keys and axes)
    pub translation_gain: f64,
    /// arm rotation gain (rad per rad, or rad per tick at full deflection)
    pub rotation_gain: f64,
    pub base_linear_gain: f64,
    pub base_angular_gain: f64,
    /// normalized torso units per second at full deflection
    pub torso_gain: f64,
    /// axis magnitudes below this produce zero
    pub deadband: f64,
    pub smoothing: f64,
    pub confidence_threshold: f64,
    /// engage button; tracked-arm deltas are emitted only while it is held
    pub clutch_button: Option<u8>,
    pub base_limits: BaseLimits,
    /// rotation from the device frame to the robot base frame, `(w, x, y, z)`
    pub frame_rotation: [f64; 4],
}

impl Default for ParserConfig {
    fn default() -> Self {
        Self {
            translation_gain: 1.0,
            rotation_gain: 1.0,
            base_linear_gain: 1.0,
            base_angular_gain: 1.0,
            torso_gain: 0.5,
            deadband: 0.05,
            smoothing: 0.6,
            confidence_threshold: 0.5,
            clutch_button: None,
            base_limits: BaseLimits::default(),
            frame_rotation: [1.0, 0.0, 0.0, 0.0],
        }
    }
}

impl ParserConfig {
    pub fn validate(&self) -> Result<(), InputConfigError> {
        let gains = [
            ("translation_gain", self.translation_gain),
            ("rotation_gain", self.rotation_gain),
            ("base_linear_gain", self.base_linear_gain),
            ("base_angular_gain", self.base_angular_gain),
            ("torso_gain", self.torso_gain),
        ];
        for (field, value) in gains {
            if !(value > 0.0 && value.is_finite()) {
                return Err(InputConfigError::NonPositiveGain { field, value });
            }
        }
        if !(0.0..=1.0).contains(&self.smoothing) {
            return Err(InputConfigError::Smoothing(self.smoothing));
        }
        for (field, value) in [
            ("confidence_threshold", self.confidence_threshold),
            ("deadband", self.deadband),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(InputConfigError::OutOfUnitRange { field, value });
            }
        }
        Ok(())
    }

    pub(crate) fn apply_deadband(&self, v: f64) -> f64 {
        if v.abs() < self.deadband {
            0.0
        } else {
            v
        }
    }

    pub(crate) fn frame_rotation(&self) -> nalgebra::UnitQuaternion<f64> {
        *crate::action::Pose::from_wxyz([0.0; 3], self.frame_rotation).orientation()
    }
}

/// Axis of an arm delta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ArmAxis {
    X,
    Y,
    Z,
    Rx,
    Ry,
    Rz,
}

impl ArmAxis {
    const NAMES: [(&'static str, ArmAxis); 6] = [
        ("x", ArmAxis::X),
        ("y", ArmAxis::Y),
        ("z", ArmAxis::Z),
        ("rx", ArmAxis::Rx),
        ("ry", ArmAxis::Ry),
        ("rz", ArmAxis::Rz),
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_rotation(self) -> bool {
        self.index() >= 3
    }
}

/// A single controllable degree of freedom, written `part.axis` in config
/// files (`base.vx`, `right_arm.z`, `torso`, `left_gripper`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dof {
    BaseVx,
    BaseVy,
    BaseWz,
    Torso,
    Arm(Side, ArmAxis),
    Gripper(Side),
}

impl Dof {
    pub fn part(self) -> Part {
        match self {
            Dof::BaseVx | Dof::BaseVy | Dof::BaseWz => Part::Base,
            Dof::Torso => Part::Torso,
            Dof::Arm(s, _) => Part::arm(s),
            Dof::Gripper(s) => Part::gripper(s),
        }
    }
}

impl FromStr for Dof {
    type Err = InputConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unknown = || InputConfigError::UnknownDof(s.to_string());
        Ok(match s {
            "base.vx" => Dof::BaseVx,
            "base.vy" => Dof::BaseVy,
            "base.wz" => Dof::BaseWz,
            "torso" => Dof::Torso,
            "left_gripper" => Dof::Gripper(Side::Left),
            "right_gripper" => Dof::Gripper(Side::Right),
            _ => {
                let (part, axis) = s.split_once('.').ok_or_else(unknown)?;
                let side = match part {
                    "left_arm" => Side::Left,
                    "right_arm" => Side::Right,
                    _ => return Err(unknown()),
                };
                let axis = ArmAxis::NAMES
                    .iter()
                    .find(|(n, _)| *n == axis)
                    .map(|(_, a)| *a)
                    .ok_or_else(unknown)?;
                Dof::Arm(side, axis)
            }
        })
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dof::BaseVx => f.write_str("base.vx"),
            Dof::BaseVy => f.write_str("base.vy"),
            Dof::BaseWz => f.write_str("base.wz"),
            Dof::Torso => f.write_str("torso"),
            Dof::Gripper(s) => write!(f, "{}", Part::gripper(*s)),
            Dof::Arm(s, a) => {
                let name = ArmAxis::NAMES.iter().find(|(_, x)| x == a).map(|(n, _)| *n);
                write!(f, "{}.{}", Part::arm(*s), name.unwrap_or("?"))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyBinding {
    pub dof: Dof,
    /// +1 or -1
    pub sign: f64,
    /// overrides the parser-level gain for this key
    pub gain: Option<f64>,
}

/// Key code → binding. Each key maps to exactly one degree of freedom.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Keymap {
    bindings: BTreeMap<String, KeyBinding>,
}

impl Keymap {
    pub fn new(
        bindings: impl IntoIterator<Item = (String, KeyBinding)>,
    ) -> Result<Self, InputConfigError> {
        let mut map = BTreeMap::new();
        for (key, binding) in bindings {
            if let Some(g) = binding.gain {
                if !(g > 0.0 && g.is_finite()) {
                    return Err(InputConfigError::NonPositiveGain {
                        field: "key gain",
                        value: g,
                    });
                }
            }
            if map.insert(key.clone(), binding).is_some() {
                return Err(InputConfigError::DuplicateKey(key));
            }
        }
        Ok(Self { bindings: map })
    }

    pub fn get(&self, key: &str) -> Option<&KeyBinding> {
        self.bindings.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &KeyBinding)> {
        self.bindings.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dof_names_round_trip() {
        for s in ["base.vx", "base.wz", "torso", "left_arm.rz", "right_arm.x", "right_gripper"] {
            assert_eq!(s.parse::<Dof>().unwrap().to_string(), s);
        }
        assert!("left_leg.x".parse::<Dof>().is_err());
        assert!("left_arm.q".parse::<Dof>().is_err());
    }

    #[test]
    fn duplicate_key_rejected() {
        let b = KeyBinding {
            dof: Dof::BaseVx,
            sign: 1.0,
            gain: None,
        };
        let err = Keymap::new([("w".to_string(), b), ("w".to_string(), b)]).unwrap_err();
        assert_eq!(err, InputConfigError::DuplicateKey("w".into()));
    }

    #[test]
    fn config_validation() {
        assert!(ParserConfig::default().validate().is_ok());
        let cfg = ParserConfig {
            smoothing: 1.5,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(InputConfigError::Smoothing(_))));
        let cfg = ParserConfig {
            base_linear_gain: 0.0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
