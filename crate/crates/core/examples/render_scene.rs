//! Renders the initial pick-pot scene from every camera of an embodiment
//! and writes the RGB and depth images as PPM / PGM files.
//!
//!     cargo run --example render_scene -- tiago-like /tmp/scene

use std::path::PathBuf;

use teleop_core::robot::EmbodimentSpec;
use teleop_core::sim::{Renderer, TaskSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let spec = EmbodimentSpec::resolve(&args.next().unwrap_or_else(|| "tiago-like".into()))?;
    let out = PathBuf::from(args.next().unwrap_or_else(|| "scene".into()));
    std::fs::create_dir_all(&out)?;

    let task = TaskSpec::pick_pot();
    let state = task.initial_state(&spec, 0);
    let frame = Renderer::new(true).render(&state, &spec);
    for (rgb, depth) in frame.rgb.iter().zip(&frame.depth) {
        let mut ppm = format!("P6\n{} {}\n255\n", rgb.width, rgb.height).into_bytes();
        ppm.extend(&rgb.data);
        let path = out.join(format!("{}.ppm", rgb.camera_id));
        std::fs::write(&path, ppm)?;

        // 16-bit big-endian PGM, millimetres
        let mut pgm = format!("P5\n{} {}\n65535\n", depth.width, depth.height).into_bytes();
        pgm.extend(depth.data.iter().flat_map(|d| d.to_be_bytes()));
        std::fs::write(out.join(format!("{}_depth.pgm", depth.camera_id)), pgm)?;

        let hits = depth.data.iter().filter(|&&d| d > 0).count();
        println!("{}: {}x{}, {hits} pixels with depth -> {}", rgb.camera_id, rgb.width, rgb.height, path.display());
    }
    println!("task '{}' initially {:?}", task.name, task.check(&state));
    Ok(())
}
