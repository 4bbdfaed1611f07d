//! Runs the scripted pick-pot session locally, records it, replays the
//! episode and exports the flat dataset.
//!
//!     cargo run --example record_replay -- /tmp/episodes

use std::path::{Path, PathBuf};

use teleop_core::record::{export_dataset, read_manifest, replay, Episode};
use teleop_core::session::{run_local, Overrides, SessionConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "episodes".into()));
    let session = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sessions/pick_pot.toml");
    let record = dir.join("pick_pot.tmep");
    let cfg = SessionConfig::load(
        &session,
        &Overrides {
            record: Some(record.clone()),
            ..Default::default()
        },
    )?;
    let report = run_local(&cfg)?;
    println!("{}", report.to_json());

    let ep = Episode::load(&record)?;
    let out = replay(&ep)?;
    println!(
        "replayed {} ticks: final hash {:016x}, matches footer {}",
        out.ticks,
        out.final_hash,
        out.matches()
    );
    let summary = export_dataset(&ep, &dir.join("dataset"))?;
    println!("exported {} ticks and {} images", summary.ticks, summary.images);
    for entry in read_manifest(&dir.join("manifest.tsv"))? {
        println!("manifest: {entry:?}");
    }
    Ok(())
}
