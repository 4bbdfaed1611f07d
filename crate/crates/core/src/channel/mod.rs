//! The link between operator and robot: frame format, message codecs,
//! observation compression, command consolidation, latency injection and
//! the TCP / WebSocket transports.

mod consolidate;
mod frame;
mod latency;
mod link;
mod message;
mod observation;
mod wire;
pub mod vectors;

pub use consolidate::{ConsolidationPolicy, Consolidator, CONSOLIDATED_SOURCE};
pub use frame::{
    decode_frame, encode_frame, FrameError, FrameReader, MsgType, RawFrame, ReaderStats,
    FRAME_OVERHEAD, HEADER_LEN, MAGIC, MAX_PAYLOAD, VERSION,
};
pub use latency::{inject_latency, LatencyError, LatencyInjector, LatencyModel};
pub use link::{
    connect, connect_ws, Clock, ConnectOptions, Link, LinkError, LinkStats, Role, Server,
    ACTION_QUEUE_CAPACITY, HEARTBEAT_PERIOD, HEARTBEAT_TIMEOUT,
};
pub use message::{encode_command, Control, EpisodeChunk, Message};
pub(crate) use message::decode_command;
pub use observation::{DepthImage, ObservationFrame, RgbImage, OBSERVATION_FORMAT};
pub use wire::DecodeError;
pub(crate) use wire::{Cursor, PutExt};

