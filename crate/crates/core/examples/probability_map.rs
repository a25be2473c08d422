//! Renders the Gaussian density map of a toy frame's landmarks and checks its mass.
//!
//! `cargo run --example probability_map`

use cpnet::data::make_toy_dataset;
use cpnet::prob::{make_probability_map, GaussianKernel};

const SHADES: &[u8] = b" .:-=+*#%@";

fn main() -> cpnet::Result<()> {
    let clip = make_toy_dataset(3, 1, 14, 64)?.remove(0);
    let landmarks = &clip.landmarks()[0];
    let kernel = GaussianKernel::default();
    let map = make_probability_map(landmarks, 64, 64, &kernel)?;
    println!(
        "kernel {}x{} sigma {}: {} landmarks, map mass {:.6}, peak {:.4}",
        kernel.size(),
        kernel.size(),
        kernel.sigma(),
        landmarks.len(),
        map.sum(),
        map.max()
    );
    for row in (0..64).step_by(2) {
        let line: String = (0..64)
            .map(|col| {
                let level = (map.get(row, col) / map.max() * (SHADES.len() - 1) as f64).round() as usize;
                SHADES[level] as char
            })
            .collect();
        println!("{line}");
    }
    let path = std::env::temp_dir().join("cpnet-map.png");
    map.save_png16(&path)?;
    println!("16-bit map written to {}", path.display());
    Ok(())
}
