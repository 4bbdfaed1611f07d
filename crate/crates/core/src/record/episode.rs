//! `.tmep` episode container: a header frame, one record frame per control
//! tick and a footer frame, each a complete channel frame of type 3
//! (session control) whose payload is the sub-kind byte 16, 17 or 18
//! followed by the body below. Corrupt frames are skipped by the frame
//! reader, so a damaged file still yields every intact record and the gap
//! shows up as a missing tick.
//!
//! Header body:
//!
//! ```text
//! u16 format (1)
//! str8 task name, str8 embodiment name
//! u64 config digest           FNV-1a 64 of the session config text
//! f64 tick_rate (Hz)
//! u64 start time, ms since the Unix epoch
//! u64 seed                    task randomization seed
//! f64 ik damping, u32 ik max_iterations, f64 ik tolerance
//! u32 n, n bytes              task file (TOML)
//! u32 n, n bytes              embodiment file (TOML)
//! ```
//!
//! Record body:
//!
//! ```text
//! u64 tick                    contiguous from 0
//! u64 world hash after the tick's step
//! 68 bytes                    17 × f32 action vector
//! f64 torso target            NaN when absent
//! u32 n, n bytes              action command (action payload layout without
//!                             the sub-kind byte, f64 values)
//! u32 n, n bytes              observation payload, rendered before the step
//! ```
//!
//! Footer body: `u64 final world hash, u8 success, u64 tick count, f64 sim_time`.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::action::{flatten, ActionCommand, ActionVector17, ACTION_BYTES};
use crate::channel::{
    decode_command, encode_command, Control, Cursor, DecodeError, EpisodeChunk, FrameReader, Message,
    ObservationFrame, PutExt, ReaderStats,
};
use crate::robot::{EmbodimentError, IkParams};
use crate::sim::{SimError, TaskError};

pub const EPISODE_FORMAT: u16 = 1;
pub const EPISODE_EXTENSION: &str = "tmep";

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt {what}: {source}")]
    Decode { what: &'static str, source: DecodeError },
    #[error("episode: {0}")]
    Format(String),
    #[error("tick {got} out of order, expected {expected}")]
    OutOfOrder { expected: u64, got: u64 },
    #[error("episode embodiment: {0}")]
    Embodiment(#[from] EmbodimentError),
    #[error("episode task: {0}")]
    Task(#[from] TaskError),
    #[error("replay: {0}")]
    Sim(#[from] SimError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordError + '_ {
    move |source| RecordError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeHeader {
    pub task_name: String,
    pub embodiment_name: String,
    pub config_digest: u64,
    pub tick_rate: f64,
    pub start_unix_ms: u64,
    pub seed: u64,
    pub ik: IkParams,
    pub task_toml: String,
    pub embodiment_toml: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub tick: u64,
    pub state_hash: u64,
    pub vector: ActionVector17,
    pub torso: Option<f64>,
    pub command: ActionCommand,
    /// compressed observation payload, kept encoded so files round-trip
    /// byte for byte
    pub observation: Vec<u8>,
}

impl EpisodeRecord {
    pub fn new(tick: u64, state_hash: u64, command: ActionCommand, observation: &ObservationFrame) -> Self {
        Self {
            tick,
            state_hash,
            vector: flatten(&command),
            torso: command.torso.as_ref().map(|t| t.value),
            command,
            observation: observation.compress(),
        }
    }

    pub fn observation(&self) -> Result<ObservationFrame, RecordError> {
        ObservationFrame::decompress(&self.observation).map_err(|source| RecordError::Decode {
            what: "observation",
            source,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeFooter {
    pub final_hash: u64,
    pub success: bool,
    pub tick_count: u64,
    pub sim_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub header: EpisodeHeader,
    pub records: Vec<EpisodeRecord>,
    /// absent when the writer never finished
    pub footer: Option<EpisodeFooter>,
}

impl Episode {
    pub fn new(header: EpisodeHeader) -> Self {
        Self {
            header,
            records: Vec::new(),
            footer: None,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Appends a record; ticks must be contiguous from 0.
    pub fn record_step(&mut self, rec: EpisodeRecord) -> Result<(), RecordError> {
        let expected = self.records.len() as u64;
        if rec.tick != expected {
            return Err(RecordError::OutOfOrder { expected, got: rec.tick });
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header_frame(&self.header);
        for r in &self.records {
            out.extend(record_frame(r));
        }
        if let Some(f) = &self.footer {
            out.extend(footer_frame(f));
        }
        out
    }

    /// Parses a container, skipping corrupt frames. Fails on a missing
    /// header, a tick gap or a footer whose count disagrees with the records.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, ReaderStats), RecordError> {
        let mut reader = FrameReader::new();
        reader.push(bytes);
        let mut episode: Option<Episode> = None;
        while let Some(frame) = reader.next_frame() {
            let msg = Message::decode(&frame).map_err(|source| RecordError::Decode {
                what: "episode frame",
                source,
            })?;
            let Message::Control(Control::Episode { chunk, body }) = msg else {
                return Err(RecordError::Format("unexpected non-episode frame".into()));
            };
            match (chunk, &mut episode) {
                (EpisodeChunk::Header, None) => episode = Some(Episode::new(decode_header(&body)?)),
                (EpisodeChunk::Header, Some(_)) => return Err(RecordError::Format("second header".into())),
                (_, None) => return Err(RecordError::Format("missing header".into())),
                (EpisodeChunk::Record, Some(ep)) => {
                    if ep.footer.is_some() {
                        return Err(RecordError::Format("record after footer".into()));
                    }
                    ep.record_step(decode_record(&body)?)?;
                }
                (EpisodeChunk::Footer, Some(ep)) => {
                    let f = decode_footer(&body)?;
                    if f.tick_count != ep.records.len() as u64 {
                        return Err(RecordError::Format(format!(
                            "footer counts {} ticks, file holds {}",
                            f.tick_count,
                            ep.records.len()
                        )));
                    }
                    ep.footer = Some(f);
                }
            }
        }
        let episode = episode.ok_or_else(|| RecordError::Format("missing header".into()))?;
        Ok((episode, reader.stats()))
    }

    pub fn save(&self, path: &Path) -> Result<(), RecordError> {
        std::fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self, RecordError> {
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(io_err(path))?;
        Ok(Self::from_bytes(&bytes)?.0)
    }
}

/// Streams an episode to disk one frame per tick so a crash loses at most
/// the unfinished tick.
pub struct EpisodeWriter {
    out: BufWriter<File>,
    path: String,
    ticks: u64,
}

impl EpisodeWriter {
    pub fn create(path: &Path, header: &EpisodeHeader) -> Result<Self, RecordError> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = Self {
            out: BufWriter::new(file),
            path: path.display().to_string(),
            ticks: 0,
        };
        w.write(&header_frame(header))?;
        Ok(w)
    }

    fn write(&mut self, bytes: &[u8]) -> Result<(), RecordError> {
        self.out.write_all(bytes).map_err(|source| RecordError::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn record_step(&mut self, rec: &EpisodeRecord) -> Result<(), RecordError> {
        if rec.tick != self.ticks {
            return Err(RecordError::OutOfOrder {
                expected: self.ticks,
                got: rec.tick,
            });
        }
        self.write(&record_frame(rec))?;
        self.ticks += 1;
        Ok(())
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn finish(mut self, footer: &EpisodeFooter) -> Result<(), RecordError> {
        if footer.tick_count != self.ticks {
            return Err(RecordError::Format(format!(
                "footer counts {} ticks, wrote {}",
                footer.tick_count, self.ticks
            )));
        }
        self.write(&footer_frame(footer))?;
        self.out.flush().map_err(|source| RecordError::Io {
            path: self.path.clone(),
            source,
        })
    }
}

fn episode_frame(chunk: EpisodeChunk, body: Vec<u8>) -> Vec<u8> {
    Message::Control(Control::Episode { chunk, body }).encode()
}

fn put_blob(out: &mut Vec<u8>, b: &[u8]) {
    out.put_u32(b.len() as u32);
    out.extend_from_slice(b);
}

fn header_frame(h: &EpisodeHeader) -> Vec<u8> {
    let mut b = Vec::new();
    b.put_u16(EPISODE_FORMAT);
    b.put_str8(&h.task_name);
    b.put_str8(&h.embodiment_name);
    b.put_u64(h.config_digest);
    b.put_f64(h.tick_rate);
    b.put_u64(h.start_unix_ms);
    b.put_u64(h.seed);
    b.put_f64(h.ik.damping);
    b.put_u32(h.ik.max_iterations as u32);
    b.put_f64(h.ik.tolerance);
    put_blob(&mut b, h.task_toml.as_bytes());
    put_blob(&mut b, h.embodiment_toml.as_bytes());
    episode_frame(EpisodeChunk::Header, b)
}

fn record_frame(r: &EpisodeRecord) -> Vec<u8> {
    let mut b = Vec::with_capacity(128 + r.observation.len());
    b.put_u64(r.tick);
    b.put_u64(r.state_hash);
    b.extend_from_slice(&r.vector.to_le_bytes());
    b.put_f64(r.torso.unwrap_or(f64::NAN));
    let mut cmd = Vec::new();
    encode_command(&r.command, &mut cmd);
    put_blob(&mut b, &cmd);
    put_blob(&mut b, &r.observation);
    episode_frame(EpisodeChunk::Record, b)
}

fn footer_frame(f: &EpisodeFooter) -> Vec<u8> {
    let mut b = Vec::new();
    b.put_u64(f.final_hash);
    b.put_u8(u8::from(f.success));
    b.put_u64(f.tick_count);
    b.put_f64(f.sim_time);
    episode_frame(EpisodeChunk::Footer, b)
}

fn corrupt(what: &'static str) -> impl Fn(DecodeError) -> RecordError {
    move |source| RecordError::Decode { what, source }
}

fn blob<'a>(c: &mut Cursor<'a>) -> Result<&'a [u8], DecodeError> {
    let n = c.u32()? as usize;
    c.bytes(n)
}

fn text(c: &mut Cursor<'_>) -> Result<String, DecodeError> {
    String::from_utf8(blob(c)?.to_vec()).map_err(|_| DecodeError::Utf8)
}

fn decode_header(body: &[u8]) -> Result<EpisodeHeader, RecordError> {
    let parse = || -> Result<EpisodeHeader, DecodeError> {
        let mut c = Cursor::new(body);
        let format = c.u16()?;
        if format != EPISODE_FORMAT {
            return Err(DecodeError::Invalid {
                what: "episode format",
                value: u64::from(format),
            });
        }
        let h = EpisodeHeader {
            task_name: c.str8()?,
            embodiment_name: c.str8()?,
            config_digest: c.u64()?,
            tick_rate: c.f64()?,
            start_unix_ms: c.u64()?,
            seed: c.u64()?,
            ik: IkParams {
                damping: c.f64()?,
                max_iterations: c.u32()? as usize,
                tolerance: c.f64()?,
            },
            task_toml: text(&mut c)?,
            embodiment_toml: text(&mut c)?,
        };
        c.finish()?;
        Ok(h)
    };
    parse().map_err(corrupt("episode header"))
}

fn decode_record(body: &[u8]) -> Result<EpisodeRecord, RecordError> {
    let parse = || -> Result<EpisodeRecord, DecodeError> {
        let mut c = Cursor::new(body);
        let tick = c.u64()?;
        let state_hash = c.u64()?;
        let vector = ActionVector17::from_le_bytes(c.bytes(ACTION_BYTES)?).expect("fixed length");
        let torso = c.f64()?;
        let mut cc = Cursor::new(blob(&mut c)?);
        let command = decode_command(&mut cc)?;
        cc.finish()?;
        let observation = blob(&mut c)?.to_vec();
        c.finish()?;
        Ok(EpisodeRecord {
            tick,
            state_hash,
            vector,
            torso: (!torso.is_nan()).then_some(torso),
            command,
            observation,
        })
    };
    parse().map_err(corrupt("episode record"))
}

fn decode_footer(body: &[u8]) -> Result<EpisodeFooter, RecordError> {
    let parse = || -> Result<EpisodeFooter, DecodeError> {
        let mut c = Cursor::new(body);
        let f = EpisodeFooter {
            final_hash: c.u64()?,
            success: c.bool()?,
            tick_count: c.u64()?,
            sim_time: c.f64()?,
        };
        c.finish()?;
        Ok(f)
    };
    parse().map_err(corrupt("episode footer"))
}
