//! Episode recording: the `.tmep` container, deterministic replay, dataset
//! export and the manifest sidecar.

mod episode;
mod export;
mod replay;

pub use episode::{
    Episode, EpisodeFooter, EpisodeHeader, EpisodeRecord, EpisodeWriter, RecordError, EPISODE_EXTENSION,
    EPISODE_FORMAT,
};
pub use export::{
    export_dataset, manifest_path, read_manifest, update_manifest, ExportSummary, ManifestEntry,
    MANIFEST_NAME,
};
pub use replay::{episode_world, replay, Divergence, ReplayOutcome};
