//! World state hash: 64-bit FNV-1a over this little-endian serialization:
//!
//! ```text
//! f64 sim_time
//! f64 base x, y, theta
//! f64 torso, torso_velocity
//! 2 × { u32 n, n × f64 joint positions, n × f64 joint velocities }   left, right
//! f64 gripper left, right
//! u8  gripper_closed left, right
//! u32 n_objects, n × { str8 id, 7 × f64 pose (xyz, wxyz), u8 graspable }
//! 2 × { u8 present, [u32 object index, 7 × f64 relative pose] }       left, right
//! ```
//!
//! Shapes and colors are static and excluded.

use super::world::WorldState;
use crate::channel::PutExt;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn canonical_bytes(s: &WorldState) -> Vec<u8> {
    let mut out = Vec::with_capacity(256);
    out.put_f64(s.sim_time);
    for v in [s.base.x, s.base.y, s.base.theta, s.joints.torso, s.joints.torso_velocity] {
        out.put_f64(v);
    }
    for i in 0..2 {
        out.put_u32(s.joints.arms[i].len() as u32);
        for v in s.joints.arms[i].iter().chain(&s.joints.arm_velocities[i]) {
            out.put_f64(*v);
        }
    }
    for g in s.joints.grippers {
        out.put_f64(g);
    }
    for c in s.gripper_closed {
        out.put_u8(u8::from(c));
    }
    out.put_u32(s.objects.len() as u32);
    for o in &s.objects {
        out.put_str8(&o.id);
        out.put_pose(&o.pose);
        out.put_u8(u8::from(o.graspable));
    }
    for g in &s.grasps {
        match g {
            Some(g) => {
                out.put_u8(1);
                out.put_u32(g.object as u32);
                out.put_pose(&g.relative);
            }
            None => out.put_u8(0),
        }
    }
    out
}

pub fn state_hash(s: &WorldState) -> u64 {
    fnv1a64(&canonical_bytes(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::EmbodimentSpec;
    use crate::sim::world::BasePose;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn hash_sees_small_changes() {
        let spec = EmbodimentSpec::tiago_like();
        let a = WorldState::new(&spec, BasePose::default(), vec![]);
        let mut b = a.clone();
        assert_eq!(state_hash(&a), state_hash(&b));
        b.joints.arms[1][3] += 1e-15;
        assert_ne!(state_hash(&a), state_hash(&b));
        // fixed layout size for a two-arm seven-joint robot without objects
        assert_eq!(canonical_bytes(&a).len(), 8 * 6 + 2 * (4 + 14 * 8) + 16 + 2 + 4 + 2);
    }
}
