use super::embodiment::{BaseType, EmbodimentSpec};
use super::ik::{solve_toward, IkParams};
use super::kinematics::{Chain, KinematicsError};
use crate::action::{apply_delta, ActionCommand, BaseVelocity, Part, Pose, Side};

/// Joint positions and velocities of the whole robot. Arms absent from the
/// embodiment have empty vectors; a robot without torso keeps it at 0.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct JointState {
    pub torso: f64,
    pub torso_velocity: f64,
    pub arms: [Vec<f64>; 2],
    pub arm_velocities: [Vec<f64>; 2],
    /// measured gripper closure in `[0, 1]`
    pub grippers: [f64; 2],
}

impl JointState {
    /// Torso at its lowest position, arms at the middle of their ranges.
    pub fn home(spec: &EmbodimentSpec) -> Self {
        let mut s = JointState::default();
        for (side, arm) in spec.arms() {
            let q = Chain::from_arm(arm).mid_configuration();
            s.arm_velocities[side.index()] = vec![0.0; q.len()];
            s.arms[side.index()] = q;
        }
        if let Some(t) = &spec.torso {
            s.torso = t.range[0];
        }
        s
    }

    pub fn arm(&self, side: Side) -> &[f64] {
        &self.arms[side.index()]
    }

    /// Normalized torso height in `[0, 1]`, 0 without a torso.
    pub fn torso_normalized(&self, spec: &EmbodimentSpec) -> f64 {
        spec.torso.as_ref().map_or(0.0, |t| t.normalized(self.torso))
    }
}

/// Joint-level command for one control tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RobotCommand {
    pub torso: f64,
    pub arms: [Vec<f64>; 2],
    pub grippers: [f64; 2],
    pub base: BaseVelocity,
}

impl RobotCommand {
    /// Holds every joint where it is, stops the base and keeps grippers.
    pub fn hold(state: &JointState) -> Self {
        Self {
            torso: state.torso,
            arms: state.arms.clone(),
            grippers: state.grippers,
            base: BaseVelocity::ZERO,
        }
    }
}

/// What `filter_unusable` removed from one command.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub removed: Vec<Part>,
    pub vy_zeroed: bool,
}

impl FilterReport {
    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && !self.vy_zeroed
    }
}

/// Drops fields the embodiment has no hardware for and zeroes lateral
/// velocity on a differential base. Never fails.
pub fn filter_unusable(cmd: &ActionCommand, spec: &EmbodimentSpec) -> (ActionCommand, FilterReport) {
    let mut out = cmd.clone();
    let mut report = FilterReport::default();
    for part in Part::ALL {
        if out.has(part) && !spec.supports(part) {
            out.clear(part);
            report.removed.push(part);
        }
    }
    if spec.base_type == BaseType::Differential {
        if let Some(b) = &mut out.base {
            if b.value.vy != 0.0 {
                b.value.vy = 0.0;
                report.vy_zeroed = true;
            }
        }
    }
    (out, report)
}

/// Running totals of what filtering removed over a session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterStats {
    pub removed: [u64; 6],
    pub vy_zeroed: u64,
}

impl FilterStats {
    pub fn add(&mut self, r: &FilterReport) {
        for p in &r.removed {
            self.removed[*p as usize] += 1;
        }
        self.vy_zeroed += u64::from(r.vy_zeroed);
    }

    pub fn removed(&self, part: Part) -> u64 {
        self.removed[part as usize]
    }
}

/// Maps a filtered command onto joint targets: arm deltas through damped
/// least-squares IK (at most `ik.max_iterations` per tick), torso target to
/// the lift range, base clamped to the embodiment limits, grippers passed
/// through. Absent fields hold the current state.
pub fn map_command(
    cmd: &ActionCommand,
    state: &JointState,
    spec: &EmbodimentSpec,
    ik: &IkParams,
    dt: f64,
) -> Result<RobotCommand, KinematicsError> {
    let mut out = RobotCommand::hold(state);
    for (side, arm) in spec.arms() {
        let i = side.index();
        if let Some(g) = cmd.gripper(side) {
            out.grippers[i] = g.value.clamp(0.0, 1.0);
        }
        let Some(delta) = cmd.arm(side) else {
            continue;
        };
        if delta.value.is_zero() {
            continue;
        }
        let chain = Chain::from_arm(arm);
        let root = spec.arm_root(side, state.torso).expect("arm exists");
        let q = &state.arms[i];
        let goal: Pose = apply_delta(&chain.forward_kinematics(&root, q)?, &delta.value);
        out.arms[i] = solve_toward(&chain, &root, q, &goal, ik, dt)?.q;
    }
    if let (Some(t), Some(torso)) = (&cmd.torso, &spec.torso) {
        out.torso = torso.position_for(t.value);
    }
    if let Some(b) = &cmd.base {
        let mut v = b.value.clamped(&spec.base_limits);
        if spec.base_type == BaseType::Differential {
            v.vy = 0.0;
        }
        out.base = v;
    }
    Ok(out)
}
