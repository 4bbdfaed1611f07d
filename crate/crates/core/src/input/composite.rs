use std::collections::BTreeMap;

use super::config::InputConfigError;
use super::PartialCommand;
use crate::action::{ActionCommand, Part, Side, Tagged};

/// Which device controls each body part. Parts may be unassigned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    owners: BTreeMap<Part, String>,
}

impl Assignment {
    /// Builds the table from per-device claims. Two devices claiming the
    /// same part is a configuration error.
    pub fn from_device_claims<'a, I, P>(claims: I) -> Result<Self, InputConfigError>
    where
        I: IntoIterator<Item = (&'a str, P)>,
        P: IntoIterator<Item = Part>,
    {
        let mut owners: BTreeMap<Part, String> = BTreeMap::new();
        for (device, parts) in claims {
            for part in parts {
                if let Some(first) = owners.get(&part) {
                    if first != device {
                        return Err(InputConfigError::AmbiguousAssignment {
                            part,
                            first: first.clone(),
                            second: device.to_string(),
                        });
                    }
                }
                owners.insert(part, device.to_string());
            }
        }
        Ok(Self { owners })
    }

    /// Every part to one device.
    pub fn single(device: &str) -> Self {
        Self {
            owners: Part::ALL.iter().map(|p| (*p, device.to_string())).collect(),
        }
    }

    pub fn owner(&self, part: Part) -> Option<&str> {
        self.owners.get(&part).map(String::as_str)
    }

    pub fn parts_of<'a>(&'a self, device: &'a str) -> impl Iterator<Item = Part> + 'a {
        self.owners
            .iter()
            .filter(move |(_, d)| d.as_str() == device)
            .map(|(p, _)| *p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Part, &str)> {
        self.owners.iter().map(|(p, d)| (*p, d.as_str()))
    }
}

/// Takes each field from the partial of the device assigned to it. Fields
/// produced by any other device are dropped; an assigned device that was
/// silent this tick leaves the field absent.
pub fn composite_merge(
    partials: &[PartialCommand],
    assignment: &Assignment,
    timestamp_us: u64,
) -> ActionCommand {
    let mut out = ActionCommand::empty(timestamp_us);
    for p in partials {
        let owns = |part: Part| assignment.owner(part) == Some(p.device_id.as_str());
        let tag = |v| Tagged::new(v, p.device_id.clone());
        for side in Side::BOTH {
            if owns(Part::arm(side)) {
                if let Some(d) = p.arm(side) {
                    *out.arm_mut(side) = Some(tag(d));
                }
            }
            if owns(Part::gripper(side)) {
                if let Some(g) = p.gripper(side) {
                    *out.gripper_mut(side) = Some(Tagged::new(g, p.device_id.clone()));
                }
            }
        }
        if owns(Part::Base) {
            if let Some(b) = p.base {
                out.base = Some(Tagged::new(b, p.device_id.clone()));
            }
        }
        if owns(Part::Torso) {
            if let Some(t) = p.torso {
                out.torso = Some(Tagged::new(t, p.device_id.clone()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{BaseVelocity, DeltaPose};
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn delta(x: f64) -> DeltaPose {
        DeltaPose::new(Vector3::new(x, 0.0, 0.0), Vector3::zeros())
    }

    #[test]
    fn vr_plus_vision() {
        let mut vr = PartialCommand::empty("vr");
        vr.left_arm = Some(delta(0.01));
        vr.right_arm = Some(delta(0.02));
        vr.base = Some(BaseVelocity::new(0.9, 0.0, 0.0));
        let mut vision = PartialCommand::empty("vision");
        vision.base = Some(BaseVelocity::new(0.2, 0.0, 0.1));
        vision.torso = Some(0.7);

        let a = Assignment::from_device_claims([
            ("vr", vec![Part::LeftArm, Part::RightArm]),
            ("vision", vec![Part::Base, Part::Torso]),
        ])
        .unwrap();
        let cmd = composite_merge(&[vr, vision], &a, 5);
        assert_eq!(cmd.left_arm.as_ref().unwrap().source, "vr");
        assert_eq!(cmd.right_arm.as_ref().unwrap().value, delta(0.02));
        let base = cmd.base.unwrap();
        assert_eq!((base.value, base.source.as_str()), (BaseVelocity::new(0.2, 0.0, 0.1), "vision"));
        assert_eq!(cmd.torso.unwrap().value, 0.7);
        assert_eq!(cmd.timestamp_us, 5);
    }

    #[test]
    fn single_device_passes_through() {
        let mut kb = PartialCommand::empty("kb");
        kb.base = Some(BaseVelocity::new(0.3, 0.0, 0.5));
        kb.right_gripper = Some(1.0);
        let cmd = composite_merge(&[kb], &Assignment::single("kb"), 0);
        assert_eq!(cmd.base.unwrap().value, BaseVelocity::new(0.3, 0.0, 0.5));
        assert_eq!(cmd.right_gripper.unwrap().value, 1.0);
        assert!(cmd.left_arm.is_none());
    }

    #[test]
    fn silent_device_leaves_field_absent() {
        let a = Assignment::single("kb");
        let cmd = composite_merge(&[PartialCommand::empty("kb")], &a, 0);
        assert!(cmd.is_empty());
    }

    #[test]
    fn double_claim_is_rejected() {
        let err = Assignment::from_device_claims([
            ("vr", vec![Part::Base]),
            ("kb", vec![Part::Base]),
        ])
        .unwrap_err();
        assert!(matches!(err, InputConfigError::AmbiguousAssignment { part: Part::Base, .. }));
    }

    fn arb_partial(id: &'static str) -> impl Strategy<Value = PartialCommand> {
        (
            proptest::option::of(-1.0..1.0f64),
            proptest::option::of(-1.0..1.0f64),
            proptest::option::of(0.0..1.0f64),
            proptest::option::of(0.0..1.0f64),
            proptest::option::of(-1.0..1.0f64),
            proptest::option::of(0.0..1.0f64),
        )
            .prop_map(move |(l, r, lg, rg, b, t)| PartialCommand {
                device_id: id.to_string(),
                left_arm: l.map(delta),
                right_arm: r.map(delta),
                left_gripper: lg,
                right_gripper: rg,
                base: b.map(|v| BaseVelocity::new(v, 0.0, 0.0)),
                torso: t,
            })
    }

    proptest! {
        #[test]
        fn merged_fields_come_from_owner(
            a in arb_partial("a"),
            b in arb_partial("b"),
            owners in proptest::collection::vec(proptest::option::of(prop_oneof![Just("a"), Just("b"), Just("c")]), 6),
        ) {
            let claims: Vec<(&str, Vec<Part>)> = Part::ALL
                .iter()
                .zip(&owners)
                .filter_map(|(p, o)| o.map(|d| (d, vec![*p])))
                .collect();
            let asg = Assignment::from_device_claims(claims).unwrap();
            let cmd = composite_merge(&[a.clone(), b.clone()], &asg, 0);
            for part in Part::ALL {
                match cmd.source_of(part) {
                    Some(src) => prop_assert_eq!(Some(src), asg.owner(part)),
                    None => {
                        let owner_partial = [&a, &b].into_iter().find(|p| Some(p.device_id.as_str()) == asg.owner(part));
                        prop_assert!(owner_partial.is_none_or(|p| !p.has(part)));
                    }
                }
            }
        }
    }
}
