use std::f64::consts::PI;

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::action::{ActionCommand, Pose, Side};
use crate::robot::{
    filter_unusable, map_command, BaseType, Chain, EmbodimentSpec, FilterReport, IkParams, JointState,
    KinematicsError, RobotCommand,
};

/// Hand-to-surface distance below which engaging a grasp attaches an object.
pub const GRASP_THRESHOLD: f64 = 0.03;
/// Gripper travel per second, in normalized closure units.
pub const GRIPPER_RATE: f64 = 4.0;
pub const MAX_DT: f64 = 0.1;
/// Yaw rates below this integrate as straight lines.
const ARC_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("dt must be in (0, {MAX_DT}], got {0}")]
    InvalidDt(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Planar base pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    /// heading in `(-π, π]`
    pub theta: f64,
}

impl BasePose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn pose3d(&self) -> Pose {
        Pose::new(
            Vector3::new(self.x, self.y, 0.0),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.theta),
        )
    }

    /// `(dx, dy, dθ)` of `self` expressed in the frame of `prev`.
    pub fn relative_to(&self, prev: &BasePose) -> [f64; 3] {
        let (s, c) = prev.theta.sin_cos();
        let (dx, dy) = (self.x - prev.x, self.y - prev.y);
        [c * dx + s * dy, -s * dx + c * dy, wrap_angle(self.theta - prev.theta)]
    }

    /// Integrates a body-frame velocity held for `dt`. With nonzero yaw rate
    /// the path is the closed-form arc, so the result does not depend on
    /// how a duration is split into steps beyond rounding.
    pub fn integrate(&self, vx: f64, vy: f64, wz: f64, dt: f64) -> BasePose {
        let t0 = self.theta;
        let t1 = t0 + wz * dt;
        let (dx, dy) = if wz.abs() > ARC_EPS {
            let (s0, c0) = t0.sin_cos();
            let (s1, c1) = t1.sin_cos();
            (
                (vx * (s1 - s0) + vy * (c1 - c0)) / wz,
                (-vx * (c1 - c0) + vy * (s1 - s0)) / wz,
            )
        } else {
            let (s, c) = t0.sin_cos();
            ((vx * c - vy * s) * dt, (vx * s + vy * c) * dt)
        };
        BasePose::new(self.x + dx, self.y + dy, t1)
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Primitive shapes centered on their object frame; cylinders run along z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    Cylinder { radius: f64, half_height: f64 },
}

impl Shape {
    /// Signed distance from a point in the object frame to the surface,
    /// negative inside.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            Shape::Sphere { radius } => p.norm() - radius,
            Shape::Box { half_extents: h } => {
                let q = Vector3::new(p.x.abs() - h[0], p.y.abs() - h[1], p.z.abs() - h[2]);
                q.map(|v| v.max(0.0)).norm() + q.max().min(0.0)
            }
            Shape::Cylinder { radius, half_height } => {
                let d = Vector2::new(p.xy().norm() - radius, p.z.abs() - half_height);
                d.map(|v| v.max(0.0)).norm() + d.max().min(0.0)
            }
        }
    }

    /// Nearest hit `t > 0` of the ray `o + t·d` in the object frame, with the
    /// outward surface normal there.
    pub fn ray_hit(&self, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
        match *self {
            Shape::Sphere { radius } => {
                let a = d.norm_squared();
                let b = o.dot(d);
                let c = o.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [(-b - sq) / a, (-b + sq) / a].into_iter().find(|t| *t > 0.0)?;
                Some((t, (o + d * t) / radius))
            }
            Shape::Box { half_extents: h } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                let mut axis_near = 0;
                let mut axis_far = 0;
                for i in 0..3 {
                    if d[i] == 0.0 {
                        if o[i].abs() > h[i] {
                            return None;
                        }
                        continue;
                    }
                    let (mut t0, mut t1) = ((-h[i] - o[i]) / d[i], (h[i] - o[i]) / d[i]);
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    if t0 > t_near {
                        t_near = t0;
                        axis_near = i;
                    }
                    if t1 < t_far {
                        t_far = t1;
                        axis_far = i;
                    }
                }
                if t_near > t_far || t_far <= 0.0 {
                    return None;
                }
                let (t, axis) = if t_near > 0.0 { (t_near, axis_near) } else { (t_far, axis_far) };
                let mut n = Vector3::zeros();
                n[axis] = (o[axis] + d[axis] * t).signum();
                Some((t, n))
            }
            Shape::Cylinder { radius, half_height } => {
                let mut best: Option<(f64, Vector3<f64>)> = None;
                let mut consider = |t: f64, n: Vector3<f64>| {
                    if t > 0.0 && best.is_none_or(|(b, _)| t < b) {
                        best = Some((t, n));
                    }
                };
                let a = d.x * d.x + d.y * d.y;
                if a > 0.0 {
                    let b = o.x * d.x + o.y * d.y;
                    let c = o.x * o.x + o.y * o.y - radius * radius;
                    let disc = b * b - a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / a, (-b + sq) / a] {
                            let p = o + d * t;
                            if p.z.abs() <= half_height {
                                consider(t, Vector3::new(p.x, p.y, 0.0) / radius);
                            }
                        }
                    }
                }
                if d.z != 0.0 {
                    for s in [-1.0, 1.0] {
                        let t = (s * half_height - o.z) / d.z;
                        let p = o + d * t;
                        if p.x * p.x + p.y * p.y <= radius * radius {
                            consider(t, Vector3::new(0.0, 0.0, s));
                        }
                    }
                }
                best
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    /// world frame
    pub pose: Pose,
    pub graspable: bool,
    pub color: [u8; 3],
}

/// Rigid attachment of an object to a hand.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspConstraint {
    /// index into `WorldState::objects`
    pub object: usize,
    /// object pose in the hand (tool) frame at engagement
    pub relative: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub base: BasePose,
    pub joints: JointState,
    pub objects: Vec<SceneObject>,
    /// at most one per hand, indexed by `Side::index`
    pub grasps: [Option<GraspConstraint>; 2],
    /// last commanded gripper closure, used to detect open/close edges
    pub gripper_closed: [bool; 2],
    pub sim_time: f64,
}

impl WorldState {
    pub fn new(spec: &EmbodimentSpec, base: BasePose, objects: Vec<SceneObject>) -> Self {
        Self {
            base,
            joints: JointState::home(spec),
            objects,
            grasps: [None, None],
            gripper_closed: [false; 2],
            sim_time: 0.0,
        }
    }

    pub fn object(&self, id: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn is_grasped(&self, index: usize) -> bool {
        self.grasps.iter().flatten().any(|g| g.object == index)
    }

    /// Tool pose of `side` in the base frame, `None` without that arm.
    pub fn hand_pose_base(&self, spec: &EmbodimentSpec, side: Side) -> Option<Pose> {
        let arm = spec.arm(side)?;
        let root = spec.arm_root(side, self.joints.torso)?;
        Chain::from_arm(arm)
            .forward_kinematics(&root, self.joints.arm(side))
            .ok()
    }

    /// Tool pose of `side` in the world frame.
    pub fn hand_pose(&self, spec: &EmbodimentSpec, side: Side) -> Option<Pose> {
        Some(self.base.pose3d().compose(&self.hand_pose_base(spec, side)?))
    }

    /// Recomputes every grasped object's pose from its hand.
    fn update_attached(&mut self, spec: &EmbodimentSpec) {
        for side in Side::BOTH {
            let Some(g) = &self.grasps[side.index()] else {
                continue;
            };
            if let Some(hand) = self.hand_pose(spec, side) {
                self.objects[g.object].pose = hand.compose(&g.relative);
            }
        }
    }

    /// Engaging attaches the graspable object whose surface is nearest the
    /// hand's tool point, if within [`GRASP_THRESHOLD`] and not held by the
    /// other hand. Releasing leaves the object where it is.
    pub fn set_grasp(&mut self, spec: &EmbodimentSpec, side: Side, engage: bool) {
        let i = side.index();
        if !engage {
            self.grasps[i] = None;
            return;
        }
        if self.grasps[i].is_some() {
            return;
        }
        let Some(hand) = self.hand_pose(spec, side) else {
            return;
        };
        let p = hand.position();
        let nearest = self
            .objects
            .iter()
            .enumerate()
            .filter(|(k, o)| o.graspable && !self.is_grasped(*k))
            .map(|(k, o)| (k, o.shape.signed_distance(&o.pose.inverse_transform_point(p))))
            .filter(|(_, d)| *d <= GRASP_THRESHOLD)
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((k, _)) = nearest {
            self.grasps[i] = Some(GraspConstraint {
                object: k,
                relative: hand.inverse().compose(&self.objects[k].pose),
            });
        }
    }

    /// Advances the world by `dt`: base along its arc, joints toward their
    /// targets at no more than their velocity limits, grippers toward their
    /// targets, attached objects with their hands. A commanded gripper
    /// crossing 0.5 upward engages a grasp, crossing back releases it.
    pub fn step(&mut self, spec: &EmbodimentSpec, cmd: &RobotCommand, dt: f64) -> Result<(), SimError> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(SimError::InvalidDt(dt));
        }
        let v = cmd.base.clamped(&spec.base_limits);
        let vy = if spec.base_type == BaseType::Differential { 0.0 } else { v.vy };
        if v.vx != 0.0 || vy != 0.0 || v.wz != 0.0 {
            self.base = self.base.integrate(v.vx, vy, v.wz, dt);
        }

        if let Some(t) = &spec.torso {
            let target = cmd.torso.clamp(t.range[0], t.range[1]);
            let next = approach(self.joints.torso, target, t.max_velocity * dt);
            self.joints.torso_velocity = (next - self.joints.torso) / dt;
            self.joints.torso = next;
        }
        for (side, arm) in spec.arms() {
            let i = side.index();
            let target = &cmd.arms[i];
            if target.is_empty() {
                self.joints.arm_velocities[i].iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            if target.len() != arm.joints.len() {
                return Err(KinematicsError::Dimension {
                    expected: arm.joints.len(),
                    actual: target.len(),
                }
                .into());
            }
            let q = &mut self.joints.arms[i];
            let qd = &mut self.joints.arm_velocities[i];
            for (k, j) in arm.joints.iter().enumerate() {
                let next = approach(q[k], j.clamp(target[k]), j.max_velocity * dt);
                qd[k] = (next - q[k]) / dt;
                q[k] = next;
            }
            let g = &mut self.joints.grippers[i];
            *g = approach(*g, cmd.grippers[i].clamp(0.0, 1.0), GRIPPER_RATE * dt);
        }

        self.update_attached(spec);
        for (side, _) in spec.arms() {
            let i = side.index();
            let closed = cmd.grippers[i] >= 0.5;
            if closed != self.gripper_closed[i] {
                self.gripper_closed[i] = closed;
                self.set_grasp(spec, side, closed);
            }
        }
        self.sim_time += dt;
        Ok(())
    }

    /// One control tick from a unified command: embodiment filtering,
    /// mapping to joint targets, then [`WorldState::step`].
    pub fn apply(
        &mut self,
        spec: &EmbodimentSpec,
        cmd: &ActionCommand,
        ik: &IkParams,
        dt: f64,
    ) -> Result<FilterReport, SimError> {
        let (cmd, report) = filter_unusable(cmd, spec);
        let robot_cmd = map_command(&cmd, &self.joints, spec, ik, dt)?;
        self.step(spec, &robot_cmd, dt)?;
        Ok(report)
    }
}

fn approach(current: f64, target: f64, max_step: f64) -> f64 {
    current + (target - current).clamp(-max_step, max_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::BaseVelocity;
    use std::f64::consts::FRAC_PI_2;

    fn pot_at(p: Vector3<f64>) -> SceneObject {
        SceneObject {
            id: "pot".into(),
            shape: Shape::Cylinder {
                radius: 0.05,
                half_height: 0.05,
            },
            pose: Pose::new(p, UnitQuaternion::identity()),
            graspable: true,
            color: [200, 60, 40],
        }
    }

    fn drive(vx: f64, wz: f64) -> (EmbodimentSpec, WorldState, RobotCommand) {
        let spec = EmbodimentSpec::tiago_like();
        let w = WorldState::new(&spec, BasePose::default(), vec![]);
        let mut cmd = RobotCommand::hold(&w.joints);
        cmd.base = BaseVelocity::new(vx, 0.0, wz);
        (spec, w, cmd)
    }

    #[test]
    fn zero_command_only_advances_time() {
        let spec = EmbodimentSpec::tiago_like();
        let mut w = WorldState::new(&spec, BasePose::new(0.3, -0.2, 0.4), vec![pot_at(Vector3::new(1.0, 0.0, 0.5))]);
        let before = w.clone();
        w.step(&spec, &RobotCommand::hold(&w.joints), 0.05).unwrap();
        assert_eq!(w.sim_time, 0.05);
        w.sim_time = 0.0;
        assert_eq!(w, before);
    }

    #[test]
    fn straight_line() {
        let (spec, mut w, cmd) = drive(0.5, 0.0);
        for _ in 0..40 {
            w.step(&spec, &cmd, 0.05).unwrap();
        }
        assert!((w.base.x - 1.0).abs() < 1e-12 && w.base.y == 0.0 && w.base.theta == 0.0);
    }

    #[test]
    fn arc_matches_fine_euler() {
        let (spec, mut w, cmd) = drive(0.5, 0.5);
        // π seconds at 0.5 rad/s, split into a few uneven steps
        let mut left = PI;
        while left > 1e-12 {
            let dt = left.min(0.0925);
            w.step(&spec, &cmd, dt).unwrap();
            left -= dt;
        }
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
        let mut t = 0.0;
        while t < PI {
            let h = (PI - t).min(1e-5);
            // midpoint heading keeps the oracle second order
            let mid = th + 0.25 * h;
            x += 0.5 * mid.cos() * h;
            y += 0.5 * mid.sin() * h;
            th += 0.5 * h;
            t += h;
        }
        assert!((w.base.x - x).abs() < 1e-6 && (w.base.y - y).abs() < 1e-6, "{:?} vs {x} {y}", w.base);
        assert!((w.base.theta - FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn invalid_dt() {
        let (spec, mut w, cmd) = drive(0.0, 0.0);
        for dt in [0.0, -0.01, 0.2, f64::NAN] {
            assert!(matches!(w.step(&spec, &cmd, dt), Err(SimError::InvalidDt(_))));
        }
    }

    #[test]
    fn joints_respect_velocity_limits() {
        let spec = EmbodimentSpec::tiago_like();
        let mut w = WorldState::new(&spec, BasePose::default(), vec![]);
        let mut cmd = RobotCommand::hold(&w.joints);
        cmd.arms[1] = spec.right_arm.as_ref().unwrap().joints.iter().map(|j| j.hi()).collect();
        cmd.torso = 10.0;
        w.step(&spec, &cmd, 0.05).unwrap();
        for (j, v) in spec.right_arm.as_ref().unwrap().joints.iter().zip(&w.joints.arm_velocities[1]) {
            assert!(v.abs() <= j.max_velocity + 1e-12);
        }
        assert!((w.joints.torso - 0.07 * 0.05).abs() < 1e-15);
    }

    fn near_hand(offset: f64) -> (EmbodimentSpec, WorldState) {
        let spec = EmbodimentSpec::tiago_like();
        let mut w = WorldState::new(&spec, BasePose::default(), vec![]);
        let hand = w.hand_pose(&spec, Side::Right).unwrap();
        // pot surface `offset` below the tool point
        let c = hand.position() - Vector3::new(0.0, 0.0, 0.05 + offset);
        w.objects.push(pot_at(c));
        (spec, w)
    }

    #[test]
    fn grasp_within_threshold() {
        let (spec, mut w) = near_hand(0.01);
        w.set_grasp(&spec, Side::Right, true);
        assert!(w.grasps[1].is_some());
        let (spec, mut w) = near_hand(0.10);
        w.set_grasp(&spec, Side::Right, true);
        assert!(w.grasps[1].is_none());
    }

    #[test]
    fn attached_object_moves_rigidly_and_stays_on_release() {
        let (spec, mut w) = near_hand(0.01);
        let start = w.objects[0].pose;
        let mut cmd = RobotCommand::hold(&w.joints);
        cmd.grippers[1] = 1.0;
        w.step(&spec, &cmd, 0.05).unwrap();
        assert!(w.grasps[1].is_some());
        cmd.base = BaseVelocity::new(0.5, 0.0, 0.0);
        for _ in 0..8 {
            w.step(&spec, &cmd, 0.05).unwrap();
            let g = w.grasps[1].as_ref().unwrap();
            let want = w.hand_pose(&spec, Side::Right).unwrap().compose(&g.relative);
            assert_eq!(w.objects[0].pose, want);
        }
        cmd.base = BaseVelocity::ZERO;
        cmd.grippers[1] = 0.0;
        w.step(&spec, &cmd, 0.05).unwrap();
        assert!(w.grasps[1].is_none());
        let moved = w.objects[0].pose.position() - start.position();
        assert!((moved - Vector3::new(0.2, 0.0, 0.0)).norm() < 1e-12, "{moved}");
        assert!(w.objects[0].pose.angle_to(&start) < 1e-12);
        let rest = w.objects[0].pose;
        cmd.base = BaseVelocity::new(0.5, 0.0, 0.3);
        w.step(&spec, &cmd, 0.05).unwrap();
        assert_eq!(w.objects[0].pose, rest);
    }

    #[test]
    fn held_gripper_does_not_regrasp() {
        let (spec, mut w) = near_hand(0.10);
        let mut cmd = RobotCommand::hold(&w.joints);
        cmd.grippers[1] = 1.0;
        w.step(&spec, &cmd, 0.05).unwrap();
        // closing in free air then moving onto the object grabs nothing
        w.objects[0].pose = w.hand_pose(&spec, Side::Right).unwrap();
        w.step(&spec, &cmd, 0.05).unwrap();
        assert!(w.grasps[1].is_none());
    }

    #[test]
    fn signed_distances() {
        let p = Vector3::new(0.0, 0.0, 0.3);
        assert!((Shape::Sphere { radius: 0.1 }.signed_distance(&p) - 0.2).abs() < 1e-15);
        let b = Shape::Box { half_extents: [0.1, 0.2, 0.1] };
        assert!((b.signed_distance(&p) - 0.2).abs() < 1e-15);
        assert!((b.signed_distance(&Vector3::zeros()) + 0.1).abs() < 1e-15);
        let c = Shape::Cylinder { radius: 0.1, half_height: 0.2 };
        assert!((c.signed_distance(&Vector3::new(0.4, 0.0, 0.0)) - 0.3).abs() < 1e-15);
        assert!((c.signed_distance(&Vector3::new(0.4, 0.0, 0.6)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ray_hits() {
        let o = Vector3::new(-2.0, 0.0, 0.0);
        let d = Vector3::new(1.0, 0.0, 0.0);
        for s in [
            Shape::Sphere { radius: 1.0 },
            Shape::Box { half_extents: [1.0, 1.0, 1.0] },
            Shape::Cylinder { radius: 1.0, half_height: 1.0 },
        ] {
            let (t, n) = s.ray_hit(&o, &d).unwrap();
            assert!((t - 1.0).abs() < 1e-15, "{s:?}");
            assert!((n - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-15);
            assert!(s.ray_hit(&o, &(-d)).is_none());
        }
        let top = Shape::Cylinder { radius: 0.5, half_height: 0.25 }
            .ray_hit(&Vector3::new(0.1, 0.0, 2.0), &Vector3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert_eq!(top, (1.75, Vector3::new(0.0, 0.0, 1.0)));
    }

    #[test]
    fn odometry_in_previous_frame() {
        let a = BasePose::new(1.0, 2.0, FRAC_PI_2);
        let b = a.integrate(0.1, 0.0, 0.0, 1.0);
        let d = b.relative_to(&a);
        assert!((d[0] - 0.1).abs() < 1e-12 && d[1].abs() < 1e-12 && d[2] == 0.0);
        let wrapped = BasePose::new(0.0, 0.0, PI - 0.1).relative_to(&BasePose::new(0.0, 0.0, -PI + 0.1));
        assert!((wrapped[2] + 0.2).abs() < 1e-12);
    }
}
