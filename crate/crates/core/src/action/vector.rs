//! Flat 17-slot action layout used for dataset export.
//!
//! | slots    | content                         |
//! |----------|---------------------------------|
//! | 0..3     | left arm translation (m)        |
//! | 3..6     | left arm rotation vector (rad)  |
//! | 6        | left gripper                    |
//! | 7..10    | right arm translation (m)       |
//! | 10..13   | right arm rotation vector (rad) |
//! | 13       | right gripper                   |
//! | 14,15,16 | base vx, vy (m/s), wz (rad/s)   |
//!
//! Binary form: 17 little-endian `f32`, 68 bytes, slot order as above. The
//! torso target is not part of this layout.

use super::command::{ActionCommand, BaseVelocity, Tagged};
use super::pose::DeltaPose;

pub const ACTION_DIM: usize = 17;
pub const ACTION_BYTES: usize = ACTION_DIM * 4;

/// Source tag attached to every field of an unflattened command.
pub const VECTOR_SOURCE: &str = "vector";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("action vector must have {ACTION_DIM} entries, got {0}")]
pub struct DimensionError(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActionVector17(pub [f32; ACTION_DIM]);

impl ActionVector17 {
    pub fn from_slice(values: &[f32]) -> Result<Self, DimensionError> {
        let arr: [f32; ACTION_DIM] = values
            .try_into()
            .map_err(|_| DimensionError(values.len()))?;
        Ok(Self(arr))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn to_le_bytes(&self) -> [u8; ACTION_BYTES] {
        let mut out = [0u8; ACTION_BYTES];
        for (chunk, v) in out.chunks_exact_mut(4).zip(self.0.iter()) {
            chunk.copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self, DimensionError> {
        if bytes.len() != ACTION_BYTES {
            return Err(DimensionError(bytes.len() / 4));
        }
        let mut out = [0f32; ACTION_DIM];
        for (v, chunk) in out.iter_mut().zip(bytes.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        }
        Ok(Self(out))
    }
}

/// Flattens a command. Absent arms, grippers and base encode as zeros;
/// values are rounded to `f32`.
pub fn flatten(cmd: &ActionCommand) -> ActionVector17 {
    let mut v = [0f32; ACTION_DIM];
    let arms = [(&cmd.left_arm, &cmd.left_gripper, 0), (&cmd.right_arm, &cmd.right_gripper, 7)];
    for (arm, gripper, off) in arms {
        if let Some(d) = arm {
            for (i, x) in d.value.to_array().iter().enumerate() {
                v[off + i] = *x as f32;
            }
        }
        if let Some(g) = gripper {
            v[off + 6] = g.value as f32;
        }
    }
    if let Some(b) = &cmd.base {
        v[14] = b.value.vx as f32;
        v[15] = b.value.vy as f32;
        v[16] = b.value.wz as f32;
    }
    ActionVector17(v)
}

/// Rebuilds a command with every field present, tagged `"vector"`. Torso
/// stays absent because the flat layout does not carry it.
pub fn unflatten(v: &ActionVector17) -> ActionCommand {
    let s = |i: usize| f64::from(v.0[i]);
    let delta = |o: usize| DeltaPose::from_arrays([s(o), s(o + 1), s(o + 2)], [s(o + 3), s(o + 4), s(o + 5)]);
    ActionCommand {
        left_arm: Some(Tagged::new(delta(0), VECTOR_SOURCE)),
        left_gripper: Some(Tagged::new(s(6), VECTOR_SOURCE)),
        right_arm: Some(Tagged::new(delta(7), VECTOR_SOURCE)),
        right_gripper: Some(Tagged::new(s(13), VECTOR_SOURCE)),
        base: Some(Tagged::new(BaseVelocity::new(s(14), s(15), s(16)), VECTOR_SOURCE)),
        torso: None,
        timestamp_us: 0,
    }
}

/// Slice-based variant of [`unflatten`] that checks the length.
pub fn unflatten_slice(values: &[f32]) -> Result<ActionCommand, DimensionError> {
    ActionVector17::from_slice(values).map(|v| unflatten(&v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Part;
    use proptest::prelude::*;

    #[test]
    fn empty_command_is_all_zero() {
        assert_eq!(flatten(&ActionCommand::default()).0, [0.0; ACTION_DIM]);
    }

    #[test]
    fn base_only_layout() {
        let cmd = ActionCommand {
            base: Some(Tagged::new(BaseVelocity::new(0.5, 0.0, 0.2), "kb")),
            ..Default::default()
        };
        let v = flatten(&cmd);
        for (i, x) in v.0.iter().enumerate() {
            match i {
                14 => assert_eq!(*x, 0.5),
                16 => assert_eq!(*x, 0.2f32),
                _ => assert_eq!(*x, 0.0),
            }
        }
    }

    #[test]
    fn zeros_unflatten_to_zero_fields() {
        let cmd = unflatten(&ActionVector17::default());
        assert!(cmd.left_arm.as_ref().unwrap().value.is_zero());
        assert!(cmd.right_arm.as_ref().unwrap().value.is_zero());
        assert_eq!(cmd.left_gripper.as_ref().unwrap().value, 0.0);
        assert_eq!(cmd.base.as_ref().unwrap().value, BaseVelocity::ZERO);
        assert_eq!(cmd.source_of(Part::Base), Some(VECTOR_SOURCE));
        assert!(cmd.torso.is_none());
    }

    #[test]
    fn yaw_slot_maps_to_wz() {
        let mut v = ActionVector17::default();
        v.0[16] = 1.5;
        assert_eq!(unflatten(&v).base.unwrap().value.wz, 1.5);
    }

    #[test]
    fn wrong_length_is_dimension_error() {
        assert_eq!(unflatten_slice(&[0.0; 16]).unwrap_err(), DimensionError(16));
        assert!(unflatten_slice(&[0.0; 17]).is_ok());
    }

    fn rot_component() -> impl Strategy<Value = f32> {
        // keeps |rotation| < π so the vector is in the representable domain
        -1.8f32..1.8f32
    }

    proptest! {
        #[test]
        fn flatten_unflatten_identity(
            lt in prop::array::uniform3(-1.0f32..1.0),
            lr in prop::array::uniform3(rot_component()),
            rt in prop::array::uniform3(-1.0f32..1.0),
            rr in prop::array::uniform3(rot_component()),
            grip in prop::array::uniform2(0.0f32..=1.0),
            base in prop::array::uniform3(-2.0f32..2.0),
        ) {
            let mut v = [0f32; ACTION_DIM];
            v[0..3].copy_from_slice(&lt);
            v[3..6].copy_from_slice(&lr);
            v[6] = grip[0];
            v[7..10].copy_from_slice(&rt);
            v[10..13].copy_from_slice(&rr);
            v[13] = grip[1];
            v[14..17].copy_from_slice(&base);
            let v = ActionVector17(v);
            let back = flatten(&unflatten(&v));
            prop_assert_eq!(back.to_le_bytes(), v.to_le_bytes());
            prop_assert_eq!(ActionVector17::from_le_bytes(&v.to_le_bytes()).unwrap(), v);
        }
    }
}
