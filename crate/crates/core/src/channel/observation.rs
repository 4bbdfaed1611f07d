//! Observation payload (`msg_type` 1), little-endian:
//!
//! ```text
//! u16 format (1)
//! f64 sim_time
//! f64 odom dx, dy, dtheta        base motion since the previous frame, in
//!                                the previous base frame
//! f64 gripper left, right
//! 2 × { u8 present, [7 × f64 pose if present] }   left then right end effector
//! u16 n_rgb,   n_rgb   × { str8 camera_id, u32 width, u32 height,
//!                          u32 clen, clen bytes zlib of w·h·3 bytes }
//! u16 n_depth, n_depth × { str8 camera_id, u32 width, u32 height,
//!                          u32 clen, clen bytes zlib of w·h u16 LE mm }
//! ```
//!
//! Images are row-major, top row first. Depth 0 means no return. Each plane
//! is a zlib stream (deflate plus an adler-32 trailer, so corruption inside
//! a plane is detected even without the frame crc).

use std::io::{Read, Write};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;

use super::wire::{invalid, Cursor, DecodeError, PutExt};
use crate::action::{Pose, Side};

pub const OBSERVATION_FORMAT: u16 = 1;
/// Per-image pixel cap to reject absurd headers before allocating.
const MAX_PIXELS: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub camera_id: String,
    pub width: u32,
    pub height: u32,
    /// `width × height × 3` bytes
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn filled(camera_id: &str, width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let n = width as usize * height as usize;
        Self {
            camera_id: camera_id.to_string(),
            width,
            height,
            data: rgb.iter().copied().cycle().take(n * 3).collect(),
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepthImage {
    pub camera_id: String,
    pub width: u32,
    pub height: u32,
    /// millimeters, 0 = invalid
    pub data: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationFrame {
    pub sim_time: f64,
    /// `(dx, dy, dtheta)` since the previous frame
    pub base_odom_delta: [f64; 3],
    pub gripper_state: [f64; 2],
    /// base-frame end-effector poses, absent for missing arms
    pub ee_poses: [Option<Pose>; 2],
    pub rgb: Vec<RgbImage>,
    pub depth: Vec<DepthImage>,
}

impl ObservationFrame {
    pub fn ee_pose(&self, side: Side) -> Option<&Pose> {
        self.ee_poses[side.index()].as_ref()
    }

    /// Byte size of the uncompressed image planes.
    pub fn raw_image_bytes(&self) -> usize {
        self.rgb.iter().map(|i| i.data.len()).sum::<usize>()
            + self.depth.iter().map(|i| i.data.len() * 2).sum::<usize>()
    }

    pub fn compress(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.put_u16(OBSERVATION_FORMAT);
        out.put_f64(self.sim_time);
        for v in self.base_odom_delta.iter().chain(&self.gripper_state) {
            out.put_f64(*v);
        }
        for p in &self.ee_poses {
            match p {
                Some(p) => {
                    out.put_u8(1);
                    out.put_pose(p);
                }
                None => out.put_u8(0),
            }
        }
        out.put_u16(self.rgb.len() as u16);
        for img in &self.rgb {
            put_plane(&mut out, &img.camera_id, img.width, img.height, &img.data);
        }
        out.put_u16(self.depth.len() as u16);
        for img in &self.depth {
            let bytes: Vec<u8> = img.data.iter().flat_map(|d| d.to_le_bytes()).collect();
            put_plane(&mut out, &img.camera_id, img.width, img.height, &bytes);
        }
        out
    }

    pub fn decompress(payload: &[u8]) -> Result<Self, DecodeError> {
        let mut c = Cursor::new(payload);
        let format = c.u16()?;
        if format != OBSERVATION_FORMAT {
            return Err(invalid("observation format", format));
        }
        let sim_time = c.f64()?;
        let base_odom_delta = c.f64s::<3>()?;
        let gripper_state = c.f64s::<2>()?;
        let mut ee_poses = [None, None];
        for slot in &mut ee_poses {
            if c.bool()? {
                *slot = Some(c.pose()?);
            }
        }
        let n_rgb = c.u16()?;
        let mut rgb = Vec::with_capacity(n_rgb as usize);
        for _ in 0..n_rgb {
            let (camera_id, width, height, data) = get_plane(&mut c, 3)?;
            rgb.push(RgbImage {
                camera_id,
                width,
                height,
                data,
            });
        }
        let n_depth = c.u16()?;
        let mut depth = Vec::with_capacity(n_depth as usize);
        for _ in 0..n_depth {
            let (camera_id, width, height, bytes) = get_plane(&mut c, 2)?;
            depth.push(DepthImage {
                camera_id,
                width,
                height,
                data: bytes
                    .chunks_exact(2)
                    .map(|b| u16::from_le_bytes([b[0], b[1]]))
                    .collect(),
            });
        }
        c.finish()?;
        Ok(Self {
            sim_time,
            base_odom_delta,
            gripper_state,
            ee_poses,
            rgb,
            depth,
        })
    }
}

fn put_plane(out: &mut Vec<u8>, id: &str, w: u32, h: u32, raw: &[u8]) {
    let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
    enc.write_all(raw).expect("in-memory deflate");
    let compressed = enc.finish().expect("in-memory deflate");
    out.put_str8(id);
    out.put_u32(w);
    out.put_u32(h);
    out.put_u32(compressed.len() as u32);
    out.extend_from_slice(&compressed);
}

fn get_plane(c: &mut Cursor<'_>, bytes_per_pixel: u64) -> Result<(String, u32, u32, Vec<u8>), DecodeError> {
    let id = c.str8()?;
    let w = c.u32()?;
    let h = c.u32()?;
    let image_err = |detail: String| DecodeError::Image {
        id: id.clone(),
        detail,
    };
    let pixels = u64::from(w) * u64::from(h);
    if pixels > MAX_PIXELS {
        return Err(image_err(format!("{w}x{h} exceeds the size limit")));
    }
    let expected = (pixels * bytes_per_pixel) as usize;
    let clen = c.u32()? as usize;
    let compressed = c.bytes(clen)?;
    let mut raw = Vec::with_capacity(expected);
    // read one byte past the expected size to detect oversized streams
    ZlibDecoder::new(compressed)
        .take(expected as u64 + 1)
        .read_to_end(&mut raw)
        .map_err(|e| image_err(format!("corrupt deflate stream: {e}")))?;
    if raw.len() != expected {
        return Err(image_err(format!(
            "decompressed {} bytes, header implies {expected}",
            raw.len()
        )));
    }
    Ok((id, w, h, raw))
}
