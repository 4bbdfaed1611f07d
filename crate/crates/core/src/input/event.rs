use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::action::{Pose, Side};

/// A raw event from one input device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEvent {
    pub device_id: String,
    /// monotonic microseconds
    pub timestamp_us: u64,
    pub payload: EventPayload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventPayload {
    Key { code: String, pressed: bool },
    /// Value is clamped to `[-1, 1]` on construction through [`InputEvent::axis`].
    Axis { index: u8, value: f64 },
    TrackedPose { hand: Side, pose: Pose },
    Button { index: u8, pressed: bool },
    KeypointFrame(KeypointFrame),
}

impl InputEvent {
    pub fn new(device_id: impl Into<String>, timestamp_us: u64, payload: EventPayload) -> Self {
        Self {
            device_id: device_id.into(),
            timestamp_us,
            payload,
        }
    }

    pub fn key(device_id: &str, t: u64, code: &str, pressed: bool) -> Self {
        Self::new(
            device_id,
            t,
            EventPayload::Key {
                code: code.to_string(),
                pressed,
            },
        )
    }

    pub fn axis(device_id: &str, t: u64, index: u8, value: f64) -> Self {
        Self::new(
            device_id,
            t,
            EventPayload::Axis {
                index,
                value: clamp_axis(value),
            },
        )
    }

    pub fn button(device_id: &str, t: u64, index: u8, pressed: bool) -> Self {
        Self::new(device_id, t, EventPayload::Button { index, pressed })
    }

    pub fn tracked_pose(device_id: &str, t: u64, hand: Side, pose: Pose) -> Self {
        Self::new(device_id, t, EventPayload::TrackedPose { hand, pose })
    }

    pub fn keypoints(device_id: &str, t: u64, frame: KeypointFrame) -> Self {
        Self::new(device_id, t, EventPayload::KeypointFrame(frame))
    }
}

pub(crate) fn clamp_axis(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}

/// Per-keypoint detection confidence in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointConfidence {
    pub hip: f64,
    pub left_palm: f64,
    pub right_palm: f64,
    pub left_ankle: f64,
    pub right_ankle: f64,
}

impl Default for KeypointConfidence {
    fn default() -> Self {
        Self {
            hip: 1.0,
            left_palm: 1.0,
            right_palm: 1.0,
            left_ankle: 1.0,
            right_ankle: 1.0,
        }
    }
}

/// Skeleton keypoints already extracted from an RGB-D frame, in the camera
/// frame (x right, y down, z along the optical axis), absolute depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointFrame {
    pub hip_center: [f64; 3],
    /// operator heading about the vertical axis, radians, counter-clockwise
    pub hip_yaw: f64,
    pub left_palm: Pose,
    pub right_palm: Pose,
    pub left_ankle: [f64; 3],
    pub right_ankle: [f64; 3],
    #[serde(default)]
    pub confidence: KeypointConfidence,
}

impl KeypointFrame {
    pub fn palm(&self, side: Side) -> &Pose {
        match side {
            Side::Left => &self.left_palm,
            Side::Right => &self.right_palm,
        }
    }

    pub fn palm_confidence(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.confidence.left_palm,
            Side::Right => self.confidence.right_palm,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.hip_center
            .iter()
            .chain(self.left_ankle.iter())
            .chain(self.right_ankle.iter())
            .chain(std::iter::once(&self.hip_yaw))
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EventFileError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: timestamp goes backwards for device '{device}'")]
    NonMonotonic { line: usize, device: String },
}

/// Reads a newline-delimited JSON event stream. Blank lines and lines
/// starting with `#` are skipped. Timestamps must be non-decreasing per
/// device.
pub fn read_events(reader: impl BufRead) -> Result<Vec<InputEvent>, EventFileError> {
    let mut out = Vec::new();
    let mut last: std::collections::BTreeMap<String, u64> = Default::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut ev: InputEvent = serde_json::from_str(trimmed)
            .map_err(|source| EventFileError::Parse { line: i + 1, source })?;
        if let EventPayload::Axis { value, .. } = &mut ev.payload {
            *value = clamp_axis(*value);
        }
        let prev = last.entry(ev.device_id.clone()).or_insert(0);
        if ev.timestamp_us < *prev {
            return Err(EventFileError::NonMonotonic {
                line: i + 1,
                device: ev.device_id,
            });
        }
        *prev = ev.timestamp_us;
        out.push(ev);
    }
    Ok(out)
}

pub fn write_events<'a>(
    mut writer: impl Write,
    events: impl IntoIterator<Item = &'a InputEvent>,
) -> io::Result<()> {
    for ev in events {
        serde_json::to_writer(&mut writer, ev)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}
