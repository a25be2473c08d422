//! Synthesizes a small toy corpus and writes it in the on-disk clip layout.
//!
//! `cargo run --example toy_data [OUT_DIR]`

use std::path::PathBuf;

use cpnet::data::{make_toy_dataset, rasterize_landmarks, write_dataset};

fn main() -> cpnet::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cpnet-toy"));
    let clips = make_toy_dataset(7, 3, 20, 64)?;
    let dirs = write_dataset(&out, &clips)?;
    for (clip, dir) in clips.iter().zip(&dirs) {
        println!(
            "{}: {} frames of {}x{}, {} landmarks per frame -> {}",
            clip.name,
            clip.len(),
            clip.height(),
            clip.width(),
            clip.landmarks_per_frame(),
            dir.display()
        );
    }
    let first = &clips[0];
    first.frames()[0].save_png(&out.join("frame0.png"))?;
    rasterize_landmarks(&first.landmarks()[0], first.height(), first.width())?.save_png(&out.join("landmarks0.png"))?;
    println!("preview images in {}", out.display());
    Ok(())
}
