//! Embodiment descriptions, chain kinematics, damped least-squares IK and
//! the mapping from unified commands to joint targets.

mod embodiment;
mod ik;
mod kinematics;
mod mapping;

pub use embodiment::{
    ArmSpec, BaseType, CameraMount, EmbodimentError, EmbodimentSpec, JointKind, JointSpec,
    MountParent, TorsoSpec, Transform, FETCH_LIKE, TIAGO_LIKE,
};
pub use ik::{diff_ik_step, dls, limit_step, pose_error, solve_toward, IkOutcome, IkParams, DEFAULT_DAMPING};
pub use kinematics::{Chain, ChainFrames, KinematicsError, LIMIT_TOLERANCE};
pub use mapping::{filter_unusable, map_command, FilterReport, FilterStats, JointState, RobotCommand};
