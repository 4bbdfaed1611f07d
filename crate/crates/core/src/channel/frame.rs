//! Frame layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0x54 0x4D ("TM")
//! 2       1     version (1)
//! 3       1     msg_type: 0 action, 1 observation, 2 heartbeat, 3 session-control
//! 4       4     payload_len (u32)
//! 8       n     payload
//! 8+n     4     crc32 (IEEE) of the payload
//! ```

pub const MAGIC: [u8; 2] = [0x54, 0x4D];
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 8;
pub const TRAILER_LEN: usize = 4;
pub const FRAME_OVERHEAD: usize = HEADER_LEN + TRAILER_LEN;
/// Larger lengths are treated as garbage rather than waited for.
pub const MAX_PAYLOAD: usize = 16 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Action = 0,
    Observation = 1,
    Heartbeat = 2,
    SessionControl = 3,
}

impl MsgType {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            0 => MsgType::Action,
            1 => MsgType::Observation,
            2 => MsgType::Heartbeat,
            3 => MsgType::SessionControl,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("incomplete frame, need more bytes")]
    NeedMore,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    BadType(u8),
    #[error("payload length {0} exceeds limit")]
    TooLong(usize),
    #[error("length mismatch: header says {declared}, have {actual}")]
    LengthMismatch { declared: usize, actual: usize },
    #[error("crc mismatch: expected {expected:#010x}, computed {computed:#010x}")]
    Crc { expected: u32, computed: u32 },
}

pub fn encode_frame(msg_type: MsgType, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FRAME_OVERHEAD + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg_type as u8);
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(payload);
    out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    out
}

fn parse_header(buf: &[u8]) -> Result<(MsgType, usize), FrameError> {
    if buf.len() < 2 {
        return Err(FrameError::NeedMore);
    }
    if buf[..2] != MAGIC {
        return Err(FrameError::BadMagic);
    }
    if buf.len() < HEADER_LEN {
        return Err(FrameError::NeedMore);
    }
    if buf[2] != VERSION {
        return Err(FrameError::BadVersion(buf[2]));
    }
    let ty = MsgType::from_u8(buf[3]).ok_or(FrameError::BadType(buf[3]))?;
    let len = u32::from_le_bytes(buf[4..8].try_into().expect("4 bytes")) as usize;
    if len > MAX_PAYLOAD {
        return Err(FrameError::TooLong(len));
    }
    Ok((ty, len))
}

/// Decodes exactly one frame occupying all of `buf`.
pub fn decode_frame(buf: &[u8]) -> Result<RawFrame, FrameError> {
    let (msg_type, len) = parse_header(buf)?;
    let total = FRAME_OVERHEAD + len;
    if buf.len() < total {
        return Err(FrameError::NeedMore);
    }
    if buf.len() > total {
        return Err(FrameError::LengthMismatch {
            declared: len,
            actual: buf.len() - FRAME_OVERHEAD,
        });
    }
    check_crc(msg_type, &buf[HEADER_LEN..HEADER_LEN + len], &buf[HEADER_LEN + len..total])
}

fn check_crc(msg_type: MsgType, payload: &[u8], trailer: &[u8]) -> Result<RawFrame, FrameError> {
    let expected = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(payload);
    if expected != computed {
        return Err(FrameError::Crc { expected, computed });
    }
    Ok(RawFrame {
        msg_type,
        payload: payload.to_vec(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReaderStats {
    pub frames: u64,
    pub integrity_errors: u64,
    pub skipped_bytes: u64,
}

/// Incremental decoder over a byte stream. Garbage between frames is
/// skipped byte by byte until a header with a valid crc is found.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
    start: usize,
    stats: ReaderStats,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start >= self.buf.len() / 2 {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    pub fn stats(&self) -> ReaderStats {
        self.stats
    }

    pub fn buffered(&self) -> usize {
        self.buf.len() - self.start
    }

    /// Next complete frame, or `None` when more bytes are needed.
    pub fn next_frame(&mut self) -> Option<RawFrame> {
        loop {
            let avail = &self.buf[self.start..];
            match parse_header(avail) {
                Err(FrameError::NeedMore) => return None,
                Ok((ty, len)) => {
                    let total = FRAME_OVERHEAD + len;
                    if avail.len() < total {
                        return None;
                    }
                    match check_crc(ty, &avail[HEADER_LEN..HEADER_LEN + len], &avail[HEADER_LEN + len..total]) {
                        Ok(frame) => {
                            self.start += total;
                            self.stats.frames += 1;
                            return Some(frame);
                        }
                        Err(_) => {
                            self.stats.integrity_errors += 1;
                            self.skip(1);
                        }
                    }
                }
                Err(_) => self.skip(1),
            }
        }
    }

    fn skip(&mut self, n: usize) {
        self.start += n;
        self.stats.skipped_bytes += n as u64;
    }
}
