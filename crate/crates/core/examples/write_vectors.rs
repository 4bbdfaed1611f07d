//! Regenerates the shared binary test vectors in `data/vectors` (or the
//! directory given as the first argument).
//!
//!     cargo run --example write_vectors

use std::path::PathBuf;

use teleop_core::channel::vectors::{index_json, test_vectors};

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/vectors"));
    std::fs::create_dir_all(&dir)?;
    for v in test_vectors() {
        std::fs::write(dir.join(format!("{}.bin", v.name)), &v.bytes)?;
        println!("{:24} {:6} bytes  {}", v.name, v.bytes.len(), v.description);
    }
    std::fs::write(dir.join("index.json"), index_json())?;
    Ok(())
}
