use nalgebra::{DMatrix, UnitQuaternion, Vector3};

use super::embodiment::{ArmSpec, JointKind, JointSpec};
use crate::action::Pose;

/// Slack allowed on joint limits before a configuration is rejected.
pub const LIMIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {actual}")]
    Dimension { expected: usize, actual: usize },
    #[error("joint '{joint}' at {value} is outside [{lo}, {hi}]")]
    OutOfLimits {
        joint: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// A serial chain of revolute and prismatic joints ending in a tool frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    joints: Vec<JointSpec>,
    origins: Vec<Pose>,
    tool: Pose,
}

/// World position and axis of each joint plus the tool pose, for one
/// configuration.
#[derive(Debug, Clone)]
pub struct ChainFrames {
    pub joint_positions: Vec<Vector3<f64>>,
    pub joint_axes: Vec<Vector3<f64>>,
    pub tool: Pose,
}

impl Chain {
    pub fn new(joints: Vec<JointSpec>, tool: Pose) -> Self {
        let origins = joints.iter().map(|j| j.origin.pose()).collect();
        Self { joints, origins, tool }
    }

    pub fn from_arm(arm: &ArmSpec) -> Self {
        Self::new(arm.joints.clone(), arm.tool.pose())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn check(&self, q: &[f64]) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::Dimension {
                expected: self.dof(),
                actual: q.len(),
            });
        }
        for (j, &v) in self.joints.iter().zip(q) {
            if !(v >= j.lo() - LIMIT_TOLERANCE && v <= j.hi() + LIMIT_TOLERANCE) {
                return Err(KinematicsError::OutOfLimits {
                    joint: j.name.clone(),
                    value: v,
                    lo: j.lo(),
                    hi: j.hi(),
                });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (j, v) in self.joints.iter().zip(q.iter_mut()) {
            *v = j.clamp(*v);
        }
    }

    /// Midpoint of every joint range.
    pub fn mid_configuration(&self) -> Vec<f64> {
        self.joints.iter().map(|j| 0.5 * (j.lo() + j.hi())).collect()
    }

    fn joint_motion(j: &JointSpec, q: f64) -> Pose {
        match j.kind {
            JointKind::Revolute => Pose::new(
                Vector3::zeros(),
                UnitQuaternion::from_scaled_axis(j.axis() * q),
            ),
            JointKind::Prismatic => {
                let t = j.axis() * q;
                Pose::from_translation(t.x, t.y, t.z)
            }
        }
    }

    /// Joint frames and tool pose with the chain attached at `root`.
    pub fn frames(&self, root: &Pose, q: &[f64]) -> Result<ChainFrames, KinematicsError> {
        self.check(q)?;
        let mut t = *root;
        let mut joint_positions = Vec::with_capacity(self.dof());
        let mut joint_axes = Vec::with_capacity(self.dof());
        for ((j, origin), &v) in self.joints.iter().zip(&self.origins).zip(q) {
            t = t.compose(origin);
            joint_positions.push(*t.position());
            joint_axes.push(t.orientation() * j.axis());
            t = t.compose(&Self::joint_motion(j, v));
        }
        Ok(ChainFrames {
            joint_positions,
            joint_axes,
            tool: t.compose(&self.tool),
        })
    }

    pub fn forward_kinematics(&self, root: &Pose, q: &[f64]) -> Result<Pose, KinematicsError> {
        Ok(self.frames(root, q)?.tool)
    }

    /// Geometric Jacobian (6 × dof) of the tool frame, rows
    /// `[vx, vy, vz, wx, wy, wz]` in the root's parent frame.
    pub fn jacobian(&self, root: &Pose, q: &[f64]) -> Result<DMatrix<f64>, KinematicsError> {
        let f = self.frames(root, q)?;
        let p_ee = f.tool.position();
        let mut jac = DMatrix::zeros(6, self.dof());
        for (i, j) in self.joints.iter().enumerate() {
            let z = f.joint_axes[i];
            let (lin, ang) = match j.kind {
                JointKind::Revolute => (z.cross(&(p_ee - f.joint_positions[i])), z),
                JointKind::Prismatic => (z, Vector3::zeros()),
            };
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&ang);
        }
        Ok(jac)
    }
}
