//! Deterministic kinematic world: base and joint integration, sticky
//! grasping, ray-cast RGB-D observations, task predicates and state hashing.

mod hash;
mod render;
mod task;
mod world;

pub use hash::{canonical_bytes, fnv1a64, state_hash};
pub use render::{camera_pose, focal_length, render_camera, unproject, Renderer, BACKGROUND};
pub use task::{Clause, ObjectSpec, TaskError, TaskSpec, TaskStatus, PICK_POT};
pub use world::{
    wrap_angle, BasePose, GraspConstraint, SceneObject, Shape, SimError, WorldState, GRASP_THRESHOLD,
    GRIPPER_RATE, MAX_DT,
};
