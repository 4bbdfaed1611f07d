use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::config::ParserConfig;
use super::{EventPayload, InputEvent, KeypointFrame, Parser, PartialCommand};
use crate::action::{compose_delta, BaseVelocity, DeltaPose, Pose, Side};

/// Standing and crouched leg lengths (hip center to ankle midpoint), meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisionCalibration {
    pub leg_max: f64,
    pub leg_min: f64,
}

impl VisionCalibration {
    /// Normalized torso height for a measured leg length, clamped to `[0, 1]`.
    pub fn torso(&self, leg: f64) -> f64 {
        ((leg - self.leg_min) / (self.leg_max - self.leg_min)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisionConfig {
    /// Skip auto calibration and use these values.
    pub calibration: Option<VisionCalibration>,
    /// How long the operator stands still at session start.
    pub calibration_us: u64,
    /// `leg_min = leg_max × crouch_ratio` for auto calibration.
    pub crouch_ratio: f64,
}

impl Default for VisionConfig {
    fn default() -> Self {
        Self {
            calibration: None,
            calibration_us: 1_000_000,
            crouch_ratio: 0.6,
        }
    }
}

/// Camera (x right, y down, z toward the operator's back) to operator frame
/// (x toward the camera, y to the operator's left, z up).
fn camera_to_operator() -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, 0.0, -1.0, //
        1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    ))
}

fn ankle_mid(f: &KeypointFrame) -> Vector3<f64> {
    (Vector3::from(f.left_ankle) + Vector3::from(f.right_ankle)) * 0.5
}

fn wrap(a: f64) -> f64 {
    let w = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if w == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        w
    }
}

/// Exponentially smoothed hip state in the operator frame.
#[derive(Debug, Clone, Copy)]
struct HipState {
    t_us: u64,
    pos: Vector3<f64>,
    /// unwrapped
    yaw: f64,
}

#[derive(Debug, Default)]
enum Calibrating {
    #[default]
    Idle,
    Collecting {
        start_us: u64,
        sum: f64,
        n: u32,
    },
    Done(VisionCalibration),
}

/// Maps skeleton keypoints to commands: hip motion drives the base as a
/// velocity, the hip to ankle distance drives the torso, and palm motion
/// relative to the hip frame drives the arms.
pub struct VisionParser {
    device_id: String,
    cfg: ParserConfig,
    vcfg: VisionConfig,
    calib: Calibrating,
    hip: Option<HipState>,
    leg: Option<f64>,
    palms: [Option<Pose>; 2],
    clutch: Option<bool>,
    // produced since the last tick
    pending_base: Option<BaseVelocity>,
    pending_torso: Option<f64>,
    pending_arms: [Option<DeltaPose>; 2],
}

impl VisionParser {
    pub fn new(device_id: impl Into<String>, cfg: ParserConfig, vcfg: VisionConfig) -> Self {
        let calib = match vcfg.calibration {
            Some(c) => Calibrating::Done(c),
            None => Calibrating::Idle,
        };
        Self {
            device_id: device_id.into(),
            cfg,
            vcfg,
            calib,
            hip: None,
            leg: None,
            palms: [None; 2],
            clutch: None,
            pending_base: None,
            pending_torso: None,
            pending_arms: [None; 2],
        }
    }

    pub fn calibration(&self) -> Option<VisionCalibration> {
        match self.calib {
            Calibrating::Done(c) => Some(c),
            _ => None,
        }
    }

    fn engaged(&self) -> bool {
        match self.cfg.clutch_button {
            None => true,
            Some(_) => self.clutch == Some(true),
        }
    }

    fn smooth(&self, prev: f64, raw: f64) -> f64 {
        let a = self.cfg.smoothing;
        a * raw + (1.0 - a) * prev
    }

    fn calibrate(&mut self, t_us: u64, leg: f64) {
        match &mut self.calib {
            Calibrating::Idle => {
                self.calib = Calibrating::Collecting {
                    start_us: t_us,
                    sum: leg,
                    n: 1,
                }
            }
            Calibrating::Collecting { start_us, sum, n } => {
                if t_us.saturating_sub(*start_us) >= self.vcfg.calibration_us {
                    let leg_max = *sum / f64::from(*n);
                    let c = VisionCalibration {
                        leg_max,
                        leg_min: leg_max * self.vcfg.crouch_ratio,
                    };
                    log::info!("{}: calibrated leg length {leg_max:.3} m", self.device_id);
                    self.calib = Calibrating::Done(c);
                } else {
                    *sum += leg;
                    *n += 1;
                }
            }
            Calibrating::Done(_) => {}
        }
    }

    fn on_frame(&mut self, t_us: u64, f: &KeypointFrame) {
        let thr = self.cfg.confidence_threshold;
        let c = &f.confidence;
        let to_op = camera_to_operator();

        if !f.is_finite() || c.hip < thr {
            // everything is measured relative to the hips
            self.hip = None;
            self.leg = None;
            self.palms = [None; 2];
            return;
        }

        let raw_pos = to_op * Vector3::from(f.hip_center);
        let hip = match self.hip {
            Some(prev) => {
                let raw_yaw = prev.yaw + wrap(f.hip_yaw - prev.yaw);
                let pos = prev.pos.zip_map(&raw_pos, |p, r| self.smooth(p, r));
                HipState {
                    t_us,
                    pos,
                    yaw: self.smooth(prev.yaw, raw_yaw),
                }
            }
            None => HipState {
                t_us,
                pos: raw_pos,
                yaw: f.hip_yaw,
            },
        };

        let calibrated = self.calibration().is_some();
        if let Some(prev) = self.hip {
            if calibrated && t_us > prev.t_us {
                let dt = (t_us - prev.t_us) as f64 * 1e-6;
                let d_world = hip.pos - prev.pos;
                // velocity in the operator's heading frame
                let d_local = Rotation3::from_axis_angle(&Vector3::z_axis(), -prev.yaw) * d_world;
                let g = self.cfg.base_linear_gain;
                self.pending_base = Some(
                    BaseVelocity::new(
                        self.cfg.apply_deadband(d_local.x / dt * g),
                        self.cfg.apply_deadband(d_local.y / dt * g),
                        self.cfg
                            .apply_deadband((hip.yaw - prev.yaw) / dt * self.cfg.base_angular_gain),
                    )
                    .clamped(&self.cfg.base_limits),
                );
            }
        }
        self.hip = Some(hip);

        if c.left_ankle >= thr && c.right_ankle >= thr {
            let raw_leg = (Vector3::from(f.hip_center) - ankle_mid(f)).norm();
            let leg = match self.leg {
                Some(prev) => self.smooth(prev, raw_leg),
                None => raw_leg,
            };
            self.leg = Some(leg);
            self.calibrate(t_us, leg);
            if let Calibrating::Done(cal) = self.calib {
                self.pending_torso = Some(cal.torso(leg));
            }
        } else {
            self.leg = None;
        }

        let hip_frame = Pose::new(
            hip.pos,
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), hip.yaw),
        );
        let op_rot = UnitQuaternion::from_rotation_matrix(&to_op);
        let engaged = self.engaged();
        for side in Side::BOTH {
            let i = side.index();
            if f.palm_confidence(side) < thr || !engaged {
                self.palms[i] = None;
                continue;
            }
            let palm_cam = f.palm(side);
            let palm_op = Pose::new(to_op * palm_cam.position(), op_rot * palm_cam.orientation());
            let raw = hip_frame.inverse().compose(&palm_op);
            let rel = match self.palms[i] {
                Some(prev) => {
                    let a = self.cfg.smoothing;
                    Pose::new(
                        prev.position().lerp(raw.position(), a),
                        prev.orientation().slerp(raw.orientation(), a),
                    )
                }
                None => raw,
            };
            if let Some(prev) = self.palms[i] {
                let d = compose_delta(&prev, &rel)
                    .scaled(self.cfg.translation_gain, self.cfg.rotation_gain)
                    .rotated(&self.cfg.frame_rotation());
                let acc = &mut self.pending_arms[i];
                *acc = Some(match acc {
                    Some(a) => a.then(&d),
                    None => d,
                });
            }
            self.palms[i] = Some(rel);
        }
    }
}

impl Parser for VisionParser {
    fn device_id(&self) -> &str {
        &self.device_id
    }

    fn handle(&mut self, event: &InputEvent) {
        match &event.payload {
            EventPayload::KeypointFrame(f) => self.on_frame(event.timestamp_us, f),
            EventPayload::Button { index, pressed } if Some(*index) == self.cfg.clutch_button => {
                self.clutch = Some(*pressed);
            }
            _ => {}
        }
    }

    fn tick(&mut self, _now_us: u64) -> PartialCommand {
        let mut out = PartialCommand::empty(&self.device_id);
        out.base = self.pending_base.take();
        out.torso = self.pending_torso.take();
        for side in Side::BOTH {
            *out.arm_mut(side) = self.pending_arms[side.index()].take();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::KeypointConfidence;

    const FRAME_US: u64 = 33_333;

    /// Operator standing `dist` meters in front of the camera, facing it.
    fn standing(dist: f64, leg: f64) -> KeypointFrame {
        KeypointFrame {
            hip_center: [0.0, 0.0, dist],
            hip_yaw: 0.0,
            left_palm: Pose::from_translation(-0.2, -0.3, dist - 0.3),
            right_palm: Pose::from_translation(0.2, -0.3, dist - 0.3),
            left_ankle: [-0.1, leg, dist],
            right_ankle: [0.1, leg, dist],
            confidence: KeypointConfidence::default(),
        }
    }

    fn leg_of(f: &KeypointFrame) -> f64 {
        (Vector3::from(f.hip_center) - ankle_mid(f)).norm()
    }

    fn calibrated_for(f: &KeypointFrame, cfg: ParserConfig) -> VisionParser {
        let leg = leg_of(f);
        let vcfg = VisionConfig {
            calibration: Some(VisionCalibration {
                leg_max: leg,
                leg_min: leg * 0.6,
            }),
            ..Default::default()
        };
        VisionParser::new("cam", cfg, vcfg)
    }

    fn raw() -> ParserConfig {
        ParserConfig {
            smoothing: 1.0,
            deadband: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn still_operator_gives_zero_motion() {
        let f = standing(2.0, 0.9);
        let mut p = calibrated_for(&f, ParserConfig::default());
        for k in 0..10 {
            p.handle(&InputEvent::keypoints("cam", k * FRAME_US, f));
        }
        let out = p.tick(0);
        assert_eq!(out.base, Some(BaseVelocity::ZERO));
        assert!(out.left_arm.unwrap().is_zero() && out.right_arm.unwrap().is_zero());
    }

    fn walking_vx(cfg: ParserConfig, frames: u64) -> f64 {
        let speed = 0.5;
        let mut p = calibrated_for(&standing(3.0, 0.9), cfg);
        let mut vx = f64::NAN;
        for k in 0..frames {
            let t = k * FRAME_US;
            // walking toward the camera shrinks depth
            let f = standing(3.0 - speed * t as f64 * 1e-6, 0.9);
            p.handle(&InputEvent::keypoints("cam", t, f));
            if let Some(b) = p.tick(t).base {
                vx = b.vx;
            }
        }
        vx
    }

    #[test]
    fn hip_velocity_oracle_raw() {
        let vx = walking_vx(raw(), 30);
        assert!((vx - 0.5).abs() <= 0.01 * 0.5, "vx={vx}");
    }

    #[test]
    fn hip_velocity_oracle_smoothed_steady_state() {
        // a constant-velocity ramp passes through the smoother with a lag
        // but at the same slope
        let vx = walking_vx(ParserConfig { deadband: 0.0, ..Default::default() }, 60);
        assert!((vx - 0.5).abs() <= 0.02 * 0.5, "vx={vx}");
    }

    #[test]
    fn torso_boundaries_are_exact() {
        let top = standing(2.0, 0.9);
        let mut p = calibrated_for(&top, raw());
        p.handle(&InputEvent::keypoints("cam", 0, top));
        assert_eq!(p.tick(0).torso, Some(1.0));

        let cal = p.calibration().unwrap();
        let mut low = top;
        // put the ankles exactly leg_min below the hips
        low.left_ankle = [0.0, cal.leg_min, 2.0];
        low.right_ankle = [0.0, cal.leg_min, 2.0];
        let mut p = calibrated_for(&top, raw());
        p.handle(&InputEvent::keypoints("cam", 0, low));
        assert_eq!(p.tick(0).torso, Some(0.0));
    }

    #[test]
    fn low_confidence_emits_nothing() {
        let mut f = standing(2.0, 0.9);
        f.confidence = KeypointConfidence {
            hip: 0.2,
            left_palm: 0.2,
            right_palm: 0.2,
            left_ankle: 0.2,
            right_ankle: 0.2,
        };
        let mut p = calibrated_for(&f, raw());
        for k in 0..5 {
            p.handle(&InputEvent::keypoints("cam", k * FRAME_US, f));
        }
        assert!(p.tick(0).is_empty());
    }

    #[test]
    fn uncalibrated_emits_arms_only() {
        let f = standing(2.0, 0.9);
        let mut p = VisionParser::new("cam", raw(), VisionConfig::default());
        p.handle(&InputEvent::keypoints("cam", 0, f));
        p.handle(&InputEvent::keypoints("cam", FRAME_US, f));
        let out = p.tick(0);
        assert!(out.base.is_none() && out.torso.is_none());
        assert!(out.left_arm.is_some());
    }

    #[test]
    fn auto_calibration_after_one_second() {
        let f = standing(2.0, 0.9);
        let mut p = VisionParser::new("cam", raw(), VisionConfig::default());
        for k in 0..=31 {
            p.handle(&InputEvent::keypoints("cam", k * FRAME_US, f));
        }
        let c = p.calibration().unwrap();
        assert!((c.leg_max - leg_of(&f)).abs() < 1e-12);
        assert!((c.leg_min - 0.6 * c.leg_max).abs() < 1e-12);
    }

    #[test]
    fn palm_motion_relative_to_hips() {
        let a = standing(2.0, 0.9);
        let mut b = a;
        // palm moves 5 cm toward the camera: +x in the operator frame
        b.right_palm = Pose::from_translation(0.2, -0.3, 2.0 - 0.35);
        let mut p = calibrated_for(&a, raw());
        p.handle(&InputEvent::keypoints("cam", 0, a));
        p.handle(&InputEvent::keypoints("cam", FRAME_US, b));
        let d = p.tick(0).right_arm.unwrap();
        assert!((d.translation() - Vector3::new(0.05, 0.0, 0.0)).norm() < 1e-12);

        // whole body translating moves nothing relative to the hips
        let mut c = b;
        c.hip_center[0] += 0.3;
        c.right_palm = Pose::from_translation(0.5, -0.3, 2.0 - 0.35);
        c.left_palm = Pose::from_translation(0.1, -0.3, 2.0 - 0.3);
        p.handle(&InputEvent::keypoints("cam", 2 * FRAME_US, c));
        assert!(p.tick(1).right_arm.unwrap().is_zero());
    }

    #[test]
    fn turning_in_place_drives_wz() {
        let mut p = calibrated_for(&standing(2.0, 0.9), raw());
        let rate = 0.4;
        let mut wz = 0.0;
        for k in 0..20 {
            let mut f = standing(2.0, 0.9);
            f.hip_yaw = wrap(3.0 + rate * (k * FRAME_US) as f64 * 1e-6);
            p.handle(&InputEvent::keypoints("cam", k * FRAME_US, f));
            if let Some(b) = p.tick(k).base {
                wz = b.wz;
            }
        }
        // the heading crosses ±π during the run
        assert!((wz - rate).abs() < 1e-9, "wz={wz}");
    }
}
