use std::collections::BTreeSet;

use nalgebra::Vector3;

use super::config::{Dof, Keymap, ParserConfig};
use super::{EventPayload, InputEvent, Parser, PartialCommand, TickClock, TorsoIntegrator};
use crate::action::{BaseVelocity, DeltaPose, Side};

/// Each held key drives one degree of freedom. Base keys emit
/// `gain × sign` as a velocity every tick, arm keys emit `gain × sign` as a
/// per-tick delta, gripper keys emit closed (positive sign) or open, torso
/// keys move the torso target at `gain × sign` per second. Released keys
/// emit nothing.
pub struct KeyboardParser {
    device_id: String,
    keymap: Keymap,
    cfg: ParserConfig,
    held: BTreeSet<String>,
    torso: TorsoIntegrator,
    clock: TickClock,
}

impl KeyboardParser {
    pub fn new(device_id: impl Into<String>, keymap: Keymap, cfg: ParserConfig) -> Self {
        Self {
            device_id: device_id.into(),
            keymap,
            cfg,
            held: BTreeSet::new(),
            torso: TorsoIntegrator::default(),
            clock: TickClock::default(),
        }
    }

    fn gain_for(&self, dof: Dof) -> f64 {
        match dof {
            Dof::BaseVx | Dof::BaseVy => self.cfg.base_linear_gain,
            Dof::BaseWz => self.cfg.base_angular_gain,
            Dof::Torso => self.cfg.torso_gain,
            Dof::Arm(_, axis) if axis.is_rotation() => self.cfg.rotation_gain,
            Dof::Arm(..) => self.cfg.translation_gain,
            Dof::Gripper(_) => 1.0,
        }
    }
}

impl Parser for KeyboardParser {
    fn device_id(&self) -> &str {
        &self.device_id
    }

    fn handle(&mut self, event: &InputEvent) {
        if let EventPayload::Key { code, pressed } = &event.payload {
            if *pressed {
                self.held.insert(code.clone());
            } else {
                self.held.remove(code);
            }
        }
    }

    fn tick(&mut self, now_us: u64) -> PartialCommand {
        let dt = self.clock.dt(now_us);
        let mut out = PartialCommand::empty(&self.device_id);
        let mut base: Option<[f64; 3]> = None;
        let mut arms: [Option<[f64; 6]>; 2] = [None, None];
        let mut torso_rate: Option<f64> = None;

        for key in &self.held {
            let Some(b) = self.keymap.get(key) else {
                continue;
            };
            let amount = b.sign * b.gain.unwrap_or_else(|| self.gain_for(b.dof));
            match b.dof {
                Dof::BaseVx => base.get_or_insert([0.0; 3])[0] += amount,
                Dof::BaseVy => base.get_or_insert([0.0; 3])[1] += amount,
                Dof::BaseWz => base.get_or_insert([0.0; 3])[2] += amount,
                Dof::Torso => *torso_rate.get_or_insert(0.0) += amount,
                Dof::Arm(side, axis) => {
                    arms[side.index()].get_or_insert([0.0; 6])[axis.index()] += amount
                }
                Dof::Gripper(side) => {
                    *out.gripper_mut(side) = Some(if b.sign > 0.0 { 1.0 } else { 0.0 })
                }
            }
        }

        out.base = base
            .map(|[vx, vy, wz]| BaseVelocity::new(vx, vy, wz).clamped(&self.cfg.base_limits));
        let rot = self.cfg.frame_rotation();
        for side in Side::BOTH {
            if let Some(a) = arms[side.index()] {
                let d = DeltaPose::new(Vector3::new(a[0], a[1], a[2]), Vector3::new(a[3], a[4], a[5]));
                *out.arm_mut(side) = Some(d.rotated(&rot));
            }
        }
        if let Some(rate) = torso_rate {
            out.torso = Some(self.torso.advance(rate, dt));
        }
        out
    }

    fn set_torso_reference(&mut self, normalized: f64) {
        self.torso.set(normalized);
    }
}
