//! Flat dataset export and the episode manifest.
//!
//! `export_dataset` writes into a directory:
//!
//! * `actions.f32`: `ticks × 17` little-endian f32, the action vectors
//! * `torso.f64`: `ticks` little-endian f64 torso targets, NaN when absent
//! * `frames/{tick:05}_{camera}.ppm`: binary 8-bit RGB (P6)
//! * `frames/{tick:05}_{camera}_depth.pgm`: binary 16-bit depth in mm (P5,
//!   maxval 65535, big-endian samples as the format requires)
//! * `meta.json`: task, embodiment, tick rate, tick count, success, hash
//!
//! The output is a pure function of the episode.
//!
//! The manifest is a tab-separated `manifest.tsv` next to the episodes, one
//! line per episode file: `file task embodiment ticks success final_hash`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::episode::{Episode, RecordError};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RecordError + '_ {
    move |source| RecordError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RecordError> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportSummary {
    pub ticks: usize,
    pub images: usize,
}

pub fn export_dataset(ep: &Episode, dir: &Path) -> Result<ExportSummary, RecordError> {
    let frames = dir.join("frames");
    std::fs::create_dir_all(&frames).map_err(io_err(&frames))?;
    let mut actions = Vec::with_capacity(ep.len() * 68);
    let mut torso = Vec::with_capacity(ep.len() * 8);
    let mut images = 0;
    for rec in &ep.records {
        actions.extend_from_slice(&rec.vector.to_le_bytes());
        torso.extend_from_slice(&rec.torso.unwrap_or(f64::NAN).to_le_bytes());
        let obs = rec.observation()?;
        for img in &obs.rgb {
            let mut ppm = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
            ppm.extend_from_slice(&img.data);
            write_file(&frames.join(format!("{:05}_{}.ppm", rec.tick, img.camera_id)), &ppm)?;
            images += 1;
        }
        for img in &obs.depth {
            let mut pgm = format!("P5\n{} {}\n65535\n", img.width, img.height).into_bytes();
            pgm.extend(img.data.iter().flat_map(|d| d.to_be_bytes()));
            write_file(&frames.join(format!("{:05}_{}_depth.pgm", rec.tick, img.camera_id)), &pgm)?;
            images += 1;
        }
    }
    write_file(&dir.join("actions.f32"), &actions)?;
    write_file(&dir.join("torso.f64"), &torso)?;
    let meta = serde_json::json!({
        "task": ep.header.task_name,
        "embodiment": ep.header.embodiment_name,
        "tick_rate": ep.header.tick_rate,
        "ticks": ep.len(),
        "action_dim": 17,
        "success": ep.footer.map(|f| f.success),
        "final_hash": ep.footer.map(|f| format!("{:016x}", f.final_hash)),
    });
    let text = serde_json::to_string_pretty(&meta).expect("json value");
    write_file(&dir.join("meta.json"), text.as_bytes())?;
    Ok(ExportSummary {
        ticks: ep.len(),
        images,
    })
}

pub const MANIFEST_NAME: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub task: String,
    pub embodiment: String,
    pub ticks: u64,
    pub success: bool,
    pub final_hash: u64,
}

impl ManifestEntry {
    pub fn for_episode(file: &Path, ep: &Episode) -> Self {
        let footer = ep.footer;
        Self {
            file: file
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            task: ep.header.task_name.clone(),
            embodiment: ep.header.embodiment_name.clone(),
            ticks: ep.len() as u64,
            success: footer.is_some_and(|f| f.success),
            final_hash: footer.map_or(0, |f| f.final_hash),
        }
    }

    fn line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:016x}",
            self.file, self.task, self.embodiment, self.ticks, self.success, self.final_hash
        )
    }

    fn parse(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split('\t').collect();
        let [file, task, embodiment, ticks, success, hash] = f.as_slice() else {
            return None;
        };
        Some(Self {
            file: file.to_string(),
            task: task.to_string(),
            embodiment: embodiment.to_string(),
            ticks: ticks.parse().ok()?,
            success: success.parse().ok()?,
            final_hash: u64::from_str_radix(hash, 16).ok()?,
        })
    }
}

pub fn manifest_path(episode_path: &Path) -> PathBuf {
    episode_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .join(MANIFEST_NAME)
}

/// Reads a manifest; malformed lines are skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>, RecordError> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .filter_map(ManifestEntry::parse)
            .collect()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(path)(e)),
    }
}

/// Adds or replaces the entry for `entry.file`, keeping lines sorted by file.
pub fn update_manifest(path: &Path, entry: ManifestEntry) -> Result<(), RecordError> {
    let mut entries: BTreeMap<String, ManifestEntry> = read_manifest(path)?
        .into_iter()
        .map(|e| (e.file.clone(), e))
        .collect();
    entries.insert(entry.file.clone(), entry);
    let mut out = Vec::new();
    writeln!(out, "# file\ttask\tembodiment\tticks\tsuccess\tfinal_hash").expect("vec write");
    for e in entries.values() {
        writeln!(out, "{}", e.line()).expect("vec write");
    }
    write_file(path, &out)
}
