//! Binary test vectors shared with other implementations of the link (the
//! browser console). Each vector is a complete byte sequence as it appears
//! on the wire; `index.json` next to the files lists the expected decoding.
//!
//! Observation planes are zlib streams whose bytes depend on the
//! compressor; other implementations should compare decoded pixels, not the
//! compressed bytes.

use nalgebra::Vector3;
use serde_json::{json, Value};

use super::message::{Control, Message};
use super::observation::{DepthImage, ObservationFrame, RgbImage};
use crate::action::{flatten, ActionCommand, BaseVelocity, DeltaPose, Pose, Side, Tagged};
use crate::input::InputEvent;

pub struct TestVector {
    pub name: &'static str,
    pub description: &'static str,
    pub bytes: Vec<u8>,
    /// the message the bytes decode to, when they decode at all
    pub message: Option<Message>,
    pub expect: Value,
}

pub fn full_command() -> ActionCommand {
    let mut c = ActionCommand::empty(1_234_567);
    *c.arm_mut(Side::Left) = Some(Tagged::new(
        DeltaPose::new(Vector3::new(0.01, -0.02, 0.03), Vector3::new(0.0, 0.0, 0.125)),
        "vr",
    ));
    *c.arm_mut(Side::Right) = Some(Tagged::new(
        DeltaPose::new(Vector3::new(-0.5, 0.25, 0.0), Vector3::new(0.0625, 0.0, 0.0)),
        "vr",
    ));
    *c.gripper_mut(Side::Left) = Some(Tagged::new(0.0, "kb"));
    *c.gripper_mut(Side::Right) = Some(Tagged::new(1.0, "kb"));
    c.base = Some(Tagged::new(BaseVelocity::new(0.5, -0.25, 0.75), "kb"));
    c.torso = Some(Tagged::new(0.375, "kb"));
    c
}

fn partial_command() -> ActionCommand {
    let mut c = ActionCommand::empty(50_000);
    c.base = Some(Tagged::new(BaseVelocity::new(0.3, 0.0, 0.0), "console"));
    *c.gripper_mut(Side::Right) = Some(Tagged::new(1.0, "console"));
    c
}

fn events() -> Vec<InputEvent> {
    vec![
        InputEvent::key("console", 1_000, "w", true),
        InputEvent::axis("pad", 2_000, 3, -0.5),
        InputEvent::button("pad", 3_000, 1, true),
        InputEvent::tracked_pose("vr", 4_000, Side::Right, Pose::from_translation(0.25, -0.5, 1.0)),
        InputEvent::key("console", 5_000, "w", false),
    ]
}

/// 8×6 RGB gradient and 8×6 depth ramp from a head camera, plus
/// proprioception.
pub fn small_observation() -> ObservationFrame {
    let (w, h) = (8u32, 6u32);
    let mut rgb = RgbImage::filled("head", w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            let i = ((y * w + x) * 3) as usize;
            rgb.data[i..i + 3].copy_from_slice(&[(x * 32) as u8, (y * 40) as u8, 128]);
        }
    }
    let depth = DepthImage {
        camera_id: "head".into(),
        width: w,
        height: h,
        data: (0..w * h).map(|i| if i % 7 == 0 { 0 } else { 500 + 10 * i as u16 }).collect(),
    };
    ObservationFrame {
        sim_time: 1.5,
        base_odom_delta: [0.015625, 0.0, -0.03125],
        gripper_state: [0.0, 0.75],
        ee_poses: [None, Some(Pose::from_translation(0.5, -0.25, 0.75))],
        rgb: vec![rgb],
        depth: vec![depth],
    }
}

fn command_json(c: &ActionCommand) -> Value {
    let arm = |s: Side| {
        c.arm(s).map(|d| {
            let t = d.value.translation();
            let r = d.value.rotation();
            json!({"source": d.source, "translation": [t.x, t.y, t.z], "rotation": [r.x, r.y, r.z]})
        })
    };
    let scalar = |v: Option<&Tagged<f64>>| v.map(|g| json!({"source": g.source, "value": g.value}));
    json!({
        "timestamp_us": c.timestamp_us,
        "presence": c.presence(),
        "left_arm": arm(Side::Left),
        "right_arm": arm(Side::Right),
        "left_gripper": scalar(c.gripper(Side::Left)),
        "right_gripper": scalar(c.gripper(Side::Right)),
        "base": c.base.as_ref().map(|b| json!({"source": b.source, "vx": b.value.vx, "vy": b.value.vy, "wz": b.value.wz})),
        "torso": scalar(c.torso.as_ref()),
    })
}

/// Every shared vector, in a fixed order.
pub fn test_vectors() -> Vec<TestVector> {
    let mut out = Vec::new();
    let mut msg = |name, description, m: Message, expect: Value| {
        out.push(TestVector {
            name,
            description,
            bytes: m.encode(),
            message: Some(m),
            expect,
        })
    };

    let full = full_command();
    msg("action_full", "action command with every part present", Message::Action(full.clone()), command_json(&full));
    let partial = partial_command();
    msg(
        "action_partial",
        "action command with base and right gripper only",
        Message::Action(partial.clone()),
        command_json(&partial),
    );
    msg(
        "input_events",
        "raw input events: key, axis, button, tracked pose, key release",
        Message::InputEvents(events()),
        serde_json::to_value(events()).expect("events serialize"),
    );
    msg(
        "heartbeat",
        "heartbeat carrying timestamp 42",
        Message::Heartbeat { timestamp_us: 42 },
        json!({"timestamp_us": 42}),
    );
    msg(
        "control_hello",
        "session control hello from peer 'console'",
        Message::Control(Control::Hello { peer: "console".into() }),
        json!({"hello": "console"}),
    );
    msg(
        "control_finished",
        "session finished: success after 271 ticks, 13.5 s of sim time",
        Message::Control(Control::Finished {
            success: true,
            ticks: 271,
            sim_time: 13.5,
        }),
        json!({"finished": {"success": true, "ticks": 271, "sim_time": 13.5}}),
    );
    let obs = small_observation();
    let rgb_sum: u64 = obs.rgb[0].data.iter().map(|&b| b as u64).sum();
    let depth_sum: u64 = obs.depth[0].data.iter().map(|&d| d as u64).sum();
    msg(
        "observation_small",
        "observation with an 8x6 RGB gradient (r = 32x, g = 40y, b = 128) and depth 500 + 10i mm, 0 where i % 7 == 0",
        Message::Observation(obs.clone()),
        json!({
            "sim_time": obs.sim_time,
            "base_odom_delta": obs.base_odom_delta,
            "gripper_state": obs.gripper_state,
            "right_ee_position": [0.5, -0.25, 0.75],
            "rgb": {"camera_id": "head", "width": 8, "height": 6, "byte_sum": rgb_sum},
            "depth": {"camera_id": "head", "width": 8, "height": 6, "sum_mm": depth_sum},
        }),
    );

    let mut corrupt = full_command_frame();
    corrupt[8 + 3] ^= 0x10;
    out.push(TestVector {
        name: "action_corrupt",
        description: "action_full with one payload bit flipped; must be rejected",
        bytes: corrupt,
        message: None,
        expect: json!({"rejected": true}),
    });
    let mut garbage: Vec<u8> = (0..1024u32).map(|i| (i.wrapping_mul(2_654_435_761) >> 13) as u8).collect();
    garbage.extend(Message::Heartbeat { timestamp_us: 7 }.encode());
    out.push(TestVector {
        name: "garbage_then_heartbeat",
        description: "1024 bytes of garbage followed by a heartbeat with timestamp 7; a reader must resynchronize",
        bytes: garbage,
        message: Some(Message::Heartbeat { timestamp_us: 7 }),
        expect: json!({"timestamp_us": 7}),
    });
    out.push(TestVector {
        name: "action_vector17",
        description: "flat action vector of action_full: 17 little-endian f32",
        bytes: flatten(&full).to_le_bytes().to_vec(),
        message: None,
        expect: json!(flatten(&full).0.to_vec()),
    });
    out
}

fn full_command_frame() -> Vec<u8> {
    Message::Action(full_command()).encode()
}

/// The `index.json` describing [`test_vectors`].
pub fn index_json() -> String {
    let entries: Vec<Value> = test_vectors()
        .iter()
        .map(|v| {
            json!({
                "name": v.name,
                "file": format!("{}.bin", v.name),
                "description": v.description,
                "length": v.bytes.len(),
                "expect": v.expect,
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "vectors": entries })).expect("json value") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{decode_frame, FrameReader};

    #[test]
    fn vectors_decode_as_described() {
        for v in test_vectors() {
            if v.name == "action_vector17" {
                continue;
            }
            let mut r = FrameReader::new();
            r.push(&v.bytes);
            let got = r.next_frame().map(|f| Message::decode(&f).unwrap());
            assert_eq!(got, v.message, "{}", v.name);
        }
    }

    #[test]
    fn corrupt_vector_fails_crc() {
        let v = test_vectors().into_iter().find(|v| v.name == "action_corrupt").unwrap();
        assert!(decode_frame(&v.bytes).is_err());
    }
}
