//! Poses, deltas and the unified action command.

mod command;
mod pose;
mod vector;

pub use command::{ActionCommand, BaseLimits, BaseVelocity, Part, Side, Tagged};
pub use pose::{apply_delta, compose_delta, quat_exp, quat_log, DeltaPose, Pose};
pub use vector::{
    flatten, unflatten, unflatten_slice, ActionVector17, DimensionError, ACTION_BYTES, ACTION_DIM,
    VECTOR_SOURCE,
};
