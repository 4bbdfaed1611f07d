use serde::{Deserialize, Serialize};

use super::config::ParserConfig;
use super::{EventPayload, InputEvent, Parser, PartialCommand, TickClock, TorsoIntegrator};
use crate::action::{compose_delta, BaseVelocity, Pose, Side};

/// Axis and button layout of a tracked controller pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VrMapping {
    pub base_vx_axis: u8,
    pub base_vy_axis: u8,
    pub base_wz_axis: u8,
    pub torso_axis: u8,
    /// trigger axes `[left, right]`, mapped to gripper targets
    pub trigger_axes: [u8; 2],
    /// per-hand clutch buttons `[left, right]`; overridden by
    /// `ParserConfig::clutch_button` when that is set
    pub clutch_buttons: [u8; 2],
    /// joystick axes report "up" as negative
    pub invert_forward: bool,
}

impl Default for VrMapping {
    fn default() -> Self {
        Self {
            base_vx_axis: 1,
            base_vy_axis: 0,
            base_wz_axis: 2,
            torso_axis: 3,
            trigger_axes: [4, 5],
            clutch_buttons: [0, 1],
            invert_forward: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct HandState {
    current: Option<Pose>,
    previous: Option<Pose>,
    clutch: Option<bool>,
}

/// Tracked-hand parser: while a hand's clutch is held, the per-tick pose
/// displacement of the tracked controller becomes an arm delta. Joystick
/// axes drive the base and torso, triggers drive the grippers.
pub struct VrParser {
    device_id: String,
    cfg: ParserConfig,
    mapping: VrMapping,
    hands: [HandState; 2],
    axes: [Option<f64>; 16],
    torso: TorsoIntegrator,
    clock: TickClock,
}

impl VrParser {
    pub fn new(device_id: impl Into<String>, cfg: ParserConfig, mapping: VrMapping) -> Self {
        Self {
            device_id: device_id.into(),
            cfg,
            mapping,
            hands: Default::default(),
            axes: [None; 16],
            torso: TorsoIntegrator::default(),
            clock: TickClock::default(),
        }
    }

    fn axis(&self, index: u8) -> Option<f64> {
        self.axes
            .get(index as usize)
            .copied()
            .flatten()
            .map(|v| self.cfg.apply_deadband(v))
    }

    fn clutch_button(&self, side: Side) -> u8 {
        self.cfg
            .clutch_button
            .unwrap_or(self.mapping.clutch_buttons[side.index()])
    }
}

impl Parser for VrParser {
    fn device_id(&self) -> &str {
        &self.device_id
    }

    fn handle(&mut self, event: &InputEvent) {
        match &event.payload {
            EventPayload::TrackedPose { hand, pose } => {
                self.hands[hand.index()].current = Some(*pose);
            }
            EventPayload::Axis { index, value } => {
                if let Some(slot) = self.axes.get_mut(*index as usize) {
                    *slot = Some(*value);
                }
            }
            EventPayload::Button { index, pressed } => {
                for side in Side::BOTH {
                    if self.clutch_button(side) == *index {
                        self.hands[side.index()].clutch = Some(*pressed);
                    }
                }
            }
            _ => {}
        }
    }

    fn tick(&mut self, now_us: u64) -> PartialCommand {
        let dt = self.clock.dt(now_us);
        let mut out = PartialCommand::empty(&self.device_id);
        let rot = self.cfg.frame_rotation();

        for side in Side::BOTH {
            let hand = &mut self.hands[side.index()];
            if hand.clutch != Some(true) {
                // re-engaging must not produce a jump
                hand.previous = None;
                continue;
            }
            let Some(cur) = hand.current else {
                continue;
            };
            if let Some(prev) = hand.previous {
                let d = compose_delta(&prev, &cur)
                    .scaled(self.cfg.translation_gain, self.cfg.rotation_gain)
                    .rotated(&rot);
                *out.arm_mut(side) = Some(d);
            }
            hand.previous = Some(cur);
        }

        let m = &self.mapping;
        let (vx, vy, wz) = (self.axis(m.base_vx_axis), self.axis(m.base_vy_axis), self.axis(m.base_wz_axis));
        if vx.is_some() || vy.is_some() || wz.is_some() {
            let fwd = if m.invert_forward { -1.0 } else { 1.0 };
            out.base = Some(
                BaseVelocity::new(
                    fwd * vx.unwrap_or(0.0) * self.cfg.base_linear_gain,
                    vy.unwrap_or(0.0) * self.cfg.base_linear_gain,
                    wz.unwrap_or(0.0) * self.cfg.base_angular_gain,
                )
                .clamped(&self.cfg.base_limits),
            );
        }
        if let Some(rate) = self.axis(m.torso_axis).filter(|r| *r != 0.0) {
            out.torso = Some(self.torso.advance(rate * self.cfg.torso_gain, dt));
        }
        for side in Side::BOTH {
            if let Some(v) = self.axes.get(m.trigger_axes[side.index()] as usize).copied().flatten() {
                *out.gripper_mut(side) = Some(v.clamp(0.0, 1.0));
            }
        }
        out
    }

    fn set_torso_reference(&mut self, normalized: f64) {
        self.torso.set(normalized);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{apply_delta, DeltaPose};
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    fn engaged() -> VrParser {
        let mut p = VrParser::new("vr", ParserConfig::default(), VrMapping::default());
        p.handle(&InputEvent::button("vr", 0, 0, true));
        p
    }

    #[test]
    fn stationary_hand_gives_zero_delta() {
        let mut p = engaged();
        let pose = Pose::from_translation(0.3, 0.1, 1.0);
        p.handle(&InputEvent::tracked_pose("vr", 0, Side::Left, pose));
        p.tick(0);
        p.handle(&InputEvent::tracked_pose("vr", 50_000, Side::Left, pose));
        let d = p.tick(50_000).left_arm.unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn hand_translation_becomes_delta() {
        let mut p = engaged();
        p.handle(&InputEvent::tracked_pose("vr", 0, Side::Left, Pose::from_translation(0.3, 0.0, 1.0)));
        p.tick(0);
        p.handle(&InputEvent::tracked_pose("vr", 1, Side::Left, Pose::from_translation(0.32, 0.0, 1.0)));
        let d = p.tick(50_000).left_arm.unwrap();
        assert!((d.translation() - Vector3::new(0.02, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn accumulated_yaw_reaches_quarter_turn() {
        let mut p = engaged();
        let step = 5f64.to_radians();
        let mut applied = Pose::identity();
        for k in 0..=18 {
            let hand = Pose::from_xyz_rpy([0.0; 3], [0.0, 0.0, step * k as f64]);
            p.handle(&InputEvent::tracked_pose("vr", k, Side::Left, hand));
            if let Some(d) = p.tick(k * 50_000).left_arm {
                applied = apply_delta(&applied, &d);
            }
        }
        // oracle: yaw extracted directly from the accumulated quaternion
        let [w, x, y, z] = applied.wxyz();
        assert!(x.abs() < 1e-12 && y.abs() < 1e-12);
        assert!((2.0 * z.atan2(w) - PI / 2.0).abs() < 1e-6);
    }

    #[test]
    fn missing_clutch_suppresses_arms() {
        let mut p = VrParser::new("vr", ParserConfig::default(), VrMapping::default());
        p.handle(&InputEvent::tracked_pose("vr", 0, Side::Left, Pose::identity()));
        p.tick(0);
        p.handle(&InputEvent::tracked_pose("vr", 1, Side::Left, Pose::from_translation(0.1, 0.0, 0.0)));
        assert!(p.tick(50_000).left_arm.is_none());
    }

    #[test]
    fn re_engaging_does_not_jump() {
        let mut p = engaged();
        p.handle(&InputEvent::tracked_pose("vr", 0, Side::Left, Pose::identity()));
        p.tick(0);
        p.handle(&InputEvent::button("vr", 1, 0, false));
        p.handle(&InputEvent::tracked_pose("vr", 1, Side::Left, Pose::from_translation(0.5, 0.0, 0.0)));
        assert!(p.tick(50_000).left_arm.is_none());
        p.handle(&InputEvent::button("vr", 2, 0, true));
        assert!(p.tick(100_000).left_arm.is_none());
        p.handle(&InputEvent::tracked_pose("vr", 3, Side::Left, Pose::from_translation(0.51, 0.0, 0.0)));
        let d: DeltaPose = p.tick(150_000).left_arm.unwrap();
        assert!((d.translation().x - 0.01).abs() < 1e-12);
    }

    #[test]
    fn joysticks_and_triggers() {
        let mut p = VrParser::new("vr", ParserConfig::default(), VrMapping::default());
        p.handle(&InputEvent::axis("vr", 0, 1, 0.5));
        p.handle(&InputEvent::axis("vr", 0, 2, -0.25));
        p.handle(&InputEvent::axis("vr", 0, 5, 0.8));
        let out = p.tick(0);
        assert_eq!(out.base, Some(BaseVelocity::new(0.5, 0.0, -0.25)));
        assert_eq!(out.right_gripper, Some(0.8));
        assert_eq!(out.left_gripper, None);
    }
}
