//! Typed messages carried in frame payloads.
//!
//! Action payload (`msg_type` 0) starts with a sub-kind byte:
//!
//! * `0` action command: `u64 timestamp_us`, `u8 presence` (bit i set when
//!   part i is present, parts ordered left_arm, right_arm, left_gripper,
//!   right_gripper, base, torso), then for each present part in that order a
//!   `u8`-length-prefixed source tag followed by its values as f64: arm
//!   `tx ty tz rx ry rz`, gripper `g`, base `vx vy wz`, torso `t`.
//! * `1` input events, for clients that leave parsing to the robot side:
//!   `u16 count`, then per event a length-prefixed device id, `u64
//!   timestamp_us`, `u8 kind` and the kind's fields:
//!   key `0`: str8 code, u8 pressed; axis `1`: u8 index, f64 value;
//!   button `2`: u8 index, u8 pressed; tracked pose `3`: u8 hand, pose;
//!   keypoints `4`: hip xyz, hip yaw, left palm pose, right palm pose,
//!   left ankle xyz, right ankle xyz, five confidences.
//!
//! Poses are seven f64: position xyz then quaternion wxyz with w >= 0.
//!
//! Heartbeat (`msg_type` 2): `u64 timestamp_us`. The robot side answers
//! with the latest timestamp it received so the client can measure
//! round-trip time.
//!
//! Session control (`msg_type` 3) starts with a sub-kind byte: `0` hello
//! (str8 peer name), `1` goodbye, `2` finished (`u8 success`, `u64 ticks`,
//! `f64 sim_time`), `16..=18` episode header, record and footer carrying
//! recorder-defined bodies.

use super::frame::{encode_frame, MsgType, RawFrame};
use super::observation::ObservationFrame;
use super::wire::{invalid, Cursor, DecodeError, PutExt};
use crate::action::{ActionCommand, BaseVelocity, DeltaPose, Part, Side, Tagged};
use crate::input::{EventPayload, InputEvent, KeypointConfidence, KeypointFrame};

const ACTION_COMMAND: u8 = 0;
const ACTION_EVENTS: u8 = 1;

const CTRL_HELLO: u8 = 0;
const CTRL_GOODBYE: u8 = 1;
const CTRL_FINISHED: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum EpisodeChunk {
    Header = 16,
    Record = 17,
    Footer = 18,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Hello { peer: String },
    Goodbye,
    Finished { success: bool, ticks: u64, sim_time: f64 },
    Episode { chunk: EpisodeChunk, body: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Action(ActionCommand),
    InputEvents(Vec<InputEvent>),
    Observation(ObservationFrame),
    Heartbeat { timestamp_us: u64 },
    Control(Control),
}

impl Message {
    pub fn msg_type(&self) -> MsgType {
        match self {
            Message::Action(_) | Message::InputEvents(_) => MsgType::Action,
            Message::Observation(_) => MsgType::Observation,
            Message::Heartbeat { .. } => MsgType::Heartbeat,
            Message::Control(_) => MsgType::SessionControl,
        }
    }

    pub fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::Action(cmd) => {
                out.put_u8(ACTION_COMMAND);
                encode_command(cmd, &mut out);
            }
            Message::InputEvents(events) => {
                out.put_u8(ACTION_EVENTS);
                out.put_u16(events.len().min(u16::MAX as usize) as u16);
                for e in events.iter().take(u16::MAX as usize) {
                    encode_event(e, &mut out);
                }
            }
            Message::Observation(obs) => out = obs.compress(),
            Message::Heartbeat { timestamp_us } => out.put_u64(*timestamp_us),
            Message::Control(c) => encode_control(c, &mut out),
        }
        out
    }

    /// Complete wire frame.
    pub fn encode(&self) -> Vec<u8> {
        encode_frame(self.msg_type(), &self.payload())
    }

    pub fn decode(frame: &RawFrame) -> Result<Message, DecodeError> {
        Self::from_payload(frame.msg_type, &frame.payload)
    }

    pub fn from_payload(msg_type: MsgType, payload: &[u8]) -> Result<Message, DecodeError> {
        let mut c = Cursor::new(payload);
        let msg = match msg_type {
            MsgType::Action => match c.u8()? {
                ACTION_COMMAND => Message::Action(decode_command(&mut c)?),
                ACTION_EVENTS => {
                    let n = c.u16()?;
                    let events = (0..n)
                        .map(|_| decode_event(&mut c))
                        .collect::<Result<_, _>>()?;
                    Message::InputEvents(events)
                }
                k => return Err(invalid("action sub-kind", k)),
            },
            MsgType::Observation => return ObservationFrame::decompress(payload).map(Message::Observation),
            MsgType::Heartbeat => Message::Heartbeat {
                timestamp_us: c.u64()?,
            },
            MsgType::SessionControl => Message::Control(decode_control(&mut c)?),
        };
        c.finish()?;
        Ok(msg)
    }
}

pub fn encode_command(cmd: &ActionCommand, out: &mut Vec<u8>) {
    out.put_u64(cmd.timestamp_us);
    out.put_u8(cmd.presence());
    for side in Side::BOTH {
        if let Some(t) = cmd.arm(side) {
            out.put_str8(&t.source);
            for v in t.value.to_array() {
                out.put_f64(v);
            }
        }
    }
    for side in Side::BOTH {
        if let Some(t) = cmd.gripper(side) {
            out.put_str8(&t.source);
            out.put_f64(t.value);
        }
    }
    if let Some(t) = &cmd.base {
        out.put_str8(&t.source);
        out.put_f64(t.value.vx);
        out.put_f64(t.value.vy);
        out.put_f64(t.value.wz);
    }
    if let Some(t) = &cmd.torso {
        out.put_str8(&t.source);
        out.put_f64(t.value);
    }
}

pub(crate) fn decode_command(c: &mut Cursor<'_>) -> Result<ActionCommand, DecodeError> {
    let mut cmd = ActionCommand::empty(c.u64()?);
    let presence = c.u8()?;
    if presence >> Part::ALL.len() != 0 {
        return Err(invalid("presence mask", presence));
    }
    let has = |p: Part| presence & p.bit() != 0;
    for side in Side::BOTH {
        if has(Part::arm(side)) {
            let src = c.str8()?;
            let [tx, ty, tz, rx, ry, rz] = c.f64s::<6>()?;
            *cmd.arm_mut(side) = Some(Tagged::new(DeltaPose::from_arrays([tx, ty, tz], [rx, ry, rz]), src));
        }
    }
    for side in Side::BOTH {
        if has(Part::gripper(side)) {
            let src = c.str8()?;
            *cmd.gripper_mut(side) = Some(Tagged::new(c.f64()?, src));
        }
    }
    if has(Part::Base) {
        let src = c.str8()?;
        let [vx, vy, wz] = c.f64s::<3>()?;
        cmd.base = Some(Tagged::new(BaseVelocity::new(vx, vy, wz), src));
    }
    if has(Part::Torso) {
        let src = c.str8()?;
        cmd.torso = Some(Tagged::new(c.f64()?, src));
    }
    Ok(cmd)
}

fn encode_event(e: &InputEvent, out: &mut Vec<u8>) {
    out.put_str8(&e.device_id);
    out.put_u64(e.timestamp_us);
    match &e.payload {
        EventPayload::Key { code, pressed } => {
            out.put_u8(0);
            out.put_str8(code);
            out.put_u8(*pressed as u8);
        }
        EventPayload::Axis { index, value } => {
            out.put_u8(1);
            out.put_u8(*index);
            out.put_f64(*value);
        }
        EventPayload::Button { index, pressed } => {
            out.put_u8(2);
            out.put_u8(*index);
            out.put_u8(*pressed as u8);
        }
        EventPayload::TrackedPose { hand, pose } => {
            out.put_u8(3);
            out.put_u8(hand.index() as u8);
            out.put_pose(pose);
        }
        EventPayload::KeypointFrame(f) => {
            out.put_u8(4);
            for v in f.hip_center {
                out.put_f64(v);
            }
            out.put_f64(f.hip_yaw);
            out.put_pose(&f.left_palm);
            out.put_pose(&f.right_palm);
            for v in f.left_ankle.iter().chain(&f.right_ankle) {
                out.put_f64(*v);
            }
            let c = &f.confidence;
            for v in [c.hip, c.left_palm, c.right_palm, c.left_ankle, c.right_ankle] {
                out.put_f64(v);
            }
        }
    }
}

fn decode_event(c: &mut Cursor<'_>) -> Result<InputEvent, DecodeError> {
    let device_id = c.str8()?;
    let t = c.u64()?;
    let payload = match c.u8()? {
        0 => EventPayload::Key {
            code: c.str8()?,
            pressed: c.bool()?,
        },
        1 => EventPayload::Axis {
            index: c.u8()?,
            value: crate::input::clamp_axis(c.f64()?),
        },
        2 => EventPayload::Button {
            index: c.u8()?,
            pressed: c.bool()?,
        },
        3 => {
            let hand = match c.u8()? {
                0 => Side::Left,
                1 => Side::Right,
                v => return Err(invalid("hand", v)),
            };
            EventPayload::TrackedPose {
                hand,
                pose: c.pose()?,
            }
        }
        4 => {
            let hip_center = c.f64s::<3>()?;
            let hip_yaw = c.f64()?;
            let left_palm = c.pose()?;
            let right_palm = c.pose()?;
            let left_ankle = c.f64s::<3>()?;
            let right_ankle = c.f64s::<3>()?;
            let [hip, lp, rp, la, ra] = c.f64s::<5>()?;
            EventPayload::KeypointFrame(KeypointFrame {
                hip_center,
                hip_yaw,
                left_palm,
                right_palm,
                left_ankle,
                right_ankle,
                confidence: KeypointConfidence {
                    hip,
                    left_palm: lp,
                    right_palm: rp,
                    left_ankle: la,
                    right_ankle: ra,
                },
            })
        }
        k => return Err(invalid("event kind", k)),
    };
    Ok(InputEvent::new(device_id, t, payload))
}

fn encode_control(ctrl: &Control, out: &mut Vec<u8>) {
    match ctrl {
        Control::Hello { peer } => {
            out.put_u8(CTRL_HELLO);
            out.put_str8(peer);
        }
        Control::Goodbye => out.put_u8(CTRL_GOODBYE),
        Control::Finished {
            success,
            ticks,
            sim_time,
        } => {
            out.put_u8(CTRL_FINISHED);
            out.put_u8(*success as u8);
            out.put_u64(*ticks);
            out.put_f64(*sim_time);
        }
        Control::Episode { chunk, body } => {
            out.put_u8(*chunk as u8);
            out.extend_from_slice(body);
        }
    }
}

fn decode_control(c: &mut Cursor<'_>) -> Result<Control, DecodeError> {
    Ok(match c.u8()? {
        CTRL_HELLO => Control::Hello { peer: c.str8()? },
        CTRL_GOODBYE => Control::Goodbye,
        CTRL_FINISHED => Control::Finished {
            success: c.bool()?,
            ticks: c.u64()?,
            sim_time: c.f64()?,
        },
        k @ 16..=18 => {
            let chunk = match k {
                16 => EpisodeChunk::Header,
                17 => EpisodeChunk::Record,
                _ => EpisodeChunk::Footer,
            };
            Control::Episode {
                chunk,
                body: c.rest().to_vec(),
            }
        }
        k => return Err(invalid("control sub-kind", k)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::Pose;
    use crate::channel::frame::decode_frame;

    #[test]
    fn heartbeat_layout() {
        let bytes = Message::Heartbeat { timestamp_us: 0 }.encode();
        assert_eq!(bytes.len(), 20);
        let f = decode_frame(&bytes).unwrap();
        assert_eq!(Message::decode(&f).unwrap(), Message::Heartbeat { timestamp_us: 0 });
    }

    #[test]
    fn command_layout_is_fixed() {
        let mut cmd = ActionCommand::empty(7);
        cmd.base = Some(Tagged::new(BaseVelocity::new(0.5, 0.0, -1.0), "kb"));
        let p = Message::Action(cmd.clone()).payload();
        let mut want = vec![0u8];
        want.extend_from_slice(&7u64.to_le_bytes());
        want.push(1 << 4);
        want.extend_from_slice(&[2, b'k', b'b']);
        for v in [0.5f64, 0.0, -1.0] {
            want.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(p, want);
        assert_eq!(Message::from_payload(MsgType::Action, &p).unwrap(), Message::Action(cmd));
    }

    #[test]
    fn events_round_trip() {
        let events = vec![
            InputEvent::key("kb", 1, "w", true),
            InputEvent::axis("pad", 2, 3, -0.25),
            InputEvent::button("pad", 3, 1, false),
            InputEvent::tracked_pose("vr", 4, Side::Right, Pose::from_xyz_rpy([0.1, 0.2, 0.3], [0.1, -0.2, 0.3])),
        ];
        let m = Message::InputEvents(events);
        let f = decode_frame(&m.encode()).unwrap();
        assert_eq!(Message::decode(&f).unwrap(), m);
    }

    #[test]
    fn control_round_trip() {
        for c in [
            Control::Hello { peer: "operator".into() },
            Control::Goodbye,
            Control::Finished { success: true, ticks: 400, sim_time: 20.0 },
            Control::Episode { chunk: EpisodeChunk::Record, body: vec![1, 2, 3] },
        ] {
            let m = Message::Control(c);
            assert_eq!(Message::from_payload(MsgType::SessionControl, &m.payload()).unwrap(), m);
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut p = Message::Heartbeat { timestamp_us: 1 }.payload();
        p.push(0);
        assert_eq!(Message::from_payload(MsgType::Heartbeat, &p), Err(DecodeError::Trailing(1)));
    }
}
