use nalgebra::Vector3;

use super::config::ParserConfig;
use super::{EventPayload, InputEvent, Parser, PartialCommand, TickClock, TorsoIntegrator};
use crate::action::{BaseVelocity, DeltaPose, Side};

pub const MODE_BUTTON: u8 = 0;
pub const GRIPPER_BUTTON: u8 = 1;

/// Which body part the 6-DoF device currently drives. The mode button
/// cycles through the variants in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SixDofMode {
    LeftArm,
    RightArm,
    Base,
    Torso,
}

impl SixDofMode {
    pub fn next(self) -> Self {
        match self {
            SixDofMode::LeftArm => SixDofMode::RightArm,
            SixDofMode::RightArm => SixDofMode::Base,
            SixDofMode::Base => SixDofMode::Torso,
            SixDofMode::Torso => SixDofMode::LeftArm,
        }
    }

    fn arm(self) -> Option<Side> {
        match self {
            SixDofMode::LeftArm => Some(Side::Left),
            SixDofMode::RightArm => Some(Side::Right),
            _ => None,
        }
    }
}

/// Mode-switching parser for a 6-axis puck (spacemouse style) with two
/// buttons: button 0 cycles the mode, button 1 toggles the active arm's
/// gripper.
///
/// Arm modes scale axes 0..3 to a translation and 3..6 to a rotation
/// vector. Base mode maps axes 0, 1, 5 to `(vx, vy, wz)` and emits an
/// explicit zero when centered. Torso mode maps axis 2 to a torso rate.
pub struct SixDofParser {
    device_id: String,
    cfg: ParserConfig,
    mode: SixDofMode,
    axes: [f64; 6],
    buttons: [bool; 2],
    grippers: [Option<bool>; 2],
    torso: TorsoIntegrator,
    clock: TickClock,
    stop_base: bool,
}

impl SixDofParser {
    pub fn new(device_id: impl Into<String>, cfg: ParserConfig) -> Self {
        Self {
            device_id: device_id.into(),
            cfg,
            mode: SixDofMode::LeftArm,
            axes: [0.0; 6],
            buttons: [false; 2],
            grippers: [None; 2],
            torso: TorsoIntegrator::default(),
            clock: TickClock::default(),
            stop_base: false,
        }
    }

    pub fn mode(&self) -> SixDofMode {
        self.mode
    }
}

impl Parser for SixDofParser {
    fn device_id(&self) -> &str {
        &self.device_id
    }

    fn handle(&mut self, event: &InputEvent) {
        match event.payload {
            EventPayload::Axis { index, value } if (index as usize) < 6 => {
                self.axes[index as usize] = value;
            }
            EventPayload::Button { index, pressed } if index <= GRIPPER_BUTTON => {
                let was = std::mem::replace(&mut self.buttons[index as usize], pressed);
                if !pressed || was {
                    return;
                }
                if index == MODE_BUTTON {
                    if self.mode == SixDofMode::Base {
                        self.stop_base = true;
                    }
                    self.mode = self.mode.next();
                } else if let Some(side) = self.mode.arm() {
                    let g = &mut self.grippers[side.index()];
                    *g = Some(!g.unwrap_or(false));
                }
            }
            _ => {}
        }
    }

    fn tick(&mut self, now_us: u64) -> PartialCommand {
        let dt = self.clock.dt(now_us);
        let a = self.axes.map(|v| self.cfg.apply_deadband(v));
        let mut out = PartialCommand::empty(&self.device_id);

        for side in Side::BOTH {
            if let Some(closed) = self.grippers[side.index()] {
                *out.gripper_mut(side) = Some(if closed { 1.0 } else { 0.0 });
            }
        }
        if std::mem::take(&mut self.stop_base) {
            out.base = Some(BaseVelocity::ZERO);
        }

        match self.mode {
            SixDofMode::LeftArm | SixDofMode::RightArm => {
                if a.iter().any(|v| *v != 0.0) {
                    let t = Vector3::new(a[0], a[1], a[2]) * self.cfg.translation_gain;
                    let r = Vector3::new(a[3], a[4], a[5]) * self.cfg.rotation_gain;
                    let side = self.mode.arm().expect("arm mode");
                    *out.arm_mut(side) =
                        Some(DeltaPose::new(t, r).rotated(&self.cfg.frame_rotation()));
                }
            }
            SixDofMode::Base => {
                out.base = Some(
                    BaseVelocity::new(
                        a[0] * self.cfg.base_linear_gain,
                        a[1] * self.cfg.base_linear_gain,
                        a[5] * self.cfg.base_angular_gain,
                    )
                    .clamped(&self.cfg.base_limits),
                );
            }
            SixDofMode::Torso => {
                if a[2] != 0.0 {
                    out.torso = Some(self.torso.advance(a[2] * self.cfg.torso_gain, dt));
                }
            }
        }
        out
    }

    fn set_torso_reference(&mut self, normalized: f64) {
        self.torso.set(normalized);
    }
}
