use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action::{ActionCommand, BaseVelocity, DeltaPose, Side, Tagged};

/// Source tag on values the consolidator filled in itself.
pub const CONSOLIDATED_SOURCE: &str = "consolidated";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsolidationPolicy {
    /// seconds a base velocity stays valid after it was received
    pub velocity_ttl: f64,
}

impl Default for ConsolidationPolicy {
    fn default() -> Self {
        Self { velocity_ttl: 0.25 }
    }
}

impl ConsolidationPolicy {
    pub fn ttl_us(&self) -> u64 {
        (self.velocity_ttl * 1e6).round() as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Stamped<T> {
    value: Tagged<T>,
    received_us: u64,
}

/// Turns a stream of sparse commands into one complete command per control
/// tick.
///
/// * base velocity: held while younger than the ttl (inclusive), zero after
/// * arm deltas: everything received since the previous tick, composed in
///   arrival order and consumed; zero when nothing arrived
/// * grippers: last commanded value, 0 (open) before any command
/// * torso: last commanded target, the current torso height before any
pub struct Consolidator {
    policy: ConsolidationPolicy,
    base: Option<Stamped<BaseVelocity>>,
    arms: [Option<Tagged<DeltaPose>>; 2],
    grippers: [Option<Tagged<f64>>; 2],
    torso: Option<Tagged<f64>>,
    last_timestamp: BTreeMap<String, u64>,
    stale_dropped: u64,
}

impl Consolidator {
    pub fn new(policy: ConsolidationPolicy) -> Self {
        Self {
            policy,
            base: None,
            arms: [None, None],
            grippers: [None, None],
            torso: None,
            last_timestamp: BTreeMap::new(),
            stale_dropped: 0,
        }
    }

    pub fn policy(&self) -> &ConsolidationPolicy {
        &self.policy
    }

    /// Commands whose timestamp went backwards for some source.
    pub fn stale_dropped(&self) -> u64 {
        self.stale_dropped
    }

    /// Records a command received at `received_us` on the consolidator's clock.
    pub fn push(&mut self, cmd: &ActionCommand, received_us: u64) {
        let sources: Vec<&str> = crate::action::Part::ALL
            .iter()
            .filter_map(|p| cmd.source_of(*p))
            .collect();
        for s in &sources {
            if self.last_timestamp.get(*s).is_some_and(|t| cmd.timestamp_us < *t) {
                self.stale_dropped += 1;
                return;
            }
        }
        for s in sources {
            self.last_timestamp.insert(s.to_string(), cmd.timestamp_us);
        }

        if let Some(b) = &cmd.base {
            self.base = Some(Stamped {
                value: b.clone(),
                received_us,
            });
        }
        for side in Side::BOTH {
            let i = side.index();
            if let Some(d) = cmd.arm(side) {
                self.arms[i] = Some(match self.arms[i].take() {
                    Some(acc) => Tagged::new(acc.value.then(&d.value), d.source.clone()),
                    None => d.clone(),
                });
            }
            if let Some(g) = cmd.gripper(side) {
                self.grippers[i] = Some(g.clone());
            }
        }
        if let Some(t) = &cmd.torso {
            self.torso = Some(t.clone());
        }
    }

    /// The complete command for the tick at `now_us`. `current_torso` is the
    /// robot's normalized torso height, used until a torso target arrives.
    pub fn consolidate(&mut self, now_us: u64, current_torso: f64) -> ActionCommand {
        let mut out = ActionCommand::empty(now_us);
        let ttl = self.policy.ttl_us();
        out.base = Some(match &self.base {
            Some(s) if now_us.saturating_sub(s.received_us) <= ttl => s.value.clone(),
            _ => Tagged::new(BaseVelocity::ZERO, CONSOLIDATED_SOURCE),
        });
        for side in Side::BOTH {
            let i = side.index();
            *out.arm_mut(side) = Some(
                self.arms[i]
                    .take()
                    .unwrap_or_else(|| Tagged::new(DeltaPose::zero(), CONSOLIDATED_SOURCE)),
            );
            *out.gripper_mut(side) = Some(self.grippers[i].clone().unwrap_or_else(|| Tagged::new(0.0, CONSOLIDATED_SOURCE)));
        }
        out.torso = Some(self.torso.clone().unwrap_or_else(|| Tagged::new(current_torso, CONSOLIDATED_SOURCE)));
        out
    }

    /// Forgets all history; the next tick commands a full stop with open
    /// grippers.
    pub fn reset(&mut self) {
        *self = Self::new(self.policy);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Part;
    use nalgebra::Vector3;

    fn base_cmd(t: u64, vx: f64) -> ActionCommand {
        let mut c = ActionCommand::empty(t);
        c.base = Some(Tagged::new(BaseVelocity::new(vx, 0.0, 0.0), "kb"));
        c
    }

    #[test]
    fn empty_history_is_full_stop() {
        let mut c = Consolidator::new(ConsolidationPolicy::default());
        let out = c.consolidate(0, 0.3);
        for p in Part::ALL {
            assert!(out.has(p));
        }
        assert_eq!(out.base.unwrap().value, BaseVelocity::ZERO);
        assert!(out.left_arm.unwrap().value.is_zero());
        assert_eq!(out.right_gripper.unwrap().value, 0.0);
        assert_eq!(out.torso.unwrap().value, 0.3);
    }

    #[test]
    fn base_held_within_ttl_and_zeroed_after() {
        let mut c = Consolidator::new(ConsolidationPolicy::default());
        c.push(&base_cmd(0, 0.4), 0);
        assert_eq!(c.consolidate(100_000, 0.0).base.unwrap().value.vx, 0.4);
        assert_eq!(c.consolidate(250_000, 0.0).base.unwrap().value.vx, 0.4);
        let b = c.consolidate(300_000, 0.0).base.unwrap();
        assert_eq!((b.value, b.source.as_str()), (BaseVelocity::ZERO, CONSOLIDATED_SOURCE));
    }

    #[test]
    fn deltas_are_consumed_once() {
        let mut c = Consolidator::new(ConsolidationPolicy::default());
        let mut cmd = ActionCommand::empty(0);
        let d = DeltaPose::new(Vector3::new(0.01, 0.0, 0.0), Vector3::zeros());
        cmd.right_arm = Some(Tagged::new(d, "vr"));
        c.push(&cmd, 0);
        cmd.timestamp_us = 1;
        c.push(&cmd, 1);
        let first = c.consolidate(50_000, 0.0).right_arm.unwrap().value;
        assert_eq!(first.translation().x, 0.02);
        assert!(c.consolidate(100_000, 0.0).right_arm.unwrap().value.is_zero());
    }

    #[test]
    fn gripper_and_torso_hold_last() {
        let mut c = Consolidator::new(ConsolidationPolicy::default());
        let mut cmd = ActionCommand::empty(0);
        cmd.left_gripper = Some(Tagged::new(1.0, "kb"));
        cmd.torso = Some(Tagged::new(0.8, "kb"));
        c.push(&cmd, 0);
        for k in 1..100 {
            let out = c.consolidate(k * 50_000, 0.1);
            assert_eq!(out.left_gripper.unwrap().value, 1.0);
            assert_eq!(out.torso.unwrap().value, 0.8);
        }
    }

    #[test]
    fn out_of_order_command_is_ignored() {
        let mut c = Consolidator::new(ConsolidationPolicy::default());
        c.push(&base_cmd(10, 0.5), 0);
        c.push(&base_cmd(5, 0.9), 1);
        assert_eq!(c.stale_dropped(), 1);
        assert_eq!(c.consolidate(2, 0.0).base.unwrap().value.vx, 0.5);
    }

    #[test]
    fn reset_stops_everything() {
        let mut c = Consolidator::new(ConsolidationPolicy::default());
        let mut cmd = base_cmd(0, 0.5);
        cmd.right_gripper = Some(Tagged::new(1.0, "kb"));
        c.push(&cmd, 0);
        c.reset();
        let out = c.consolidate(1, 0.0);
        assert_eq!(out.base.unwrap().value, BaseVelocity::ZERO);
        assert_eq!(out.right_gripper.unwrap().value, 0.0);
    }
}
