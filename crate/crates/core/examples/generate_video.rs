//! Drives a trained checkpoint with a landmark track and writes the frames.
//!
//! `cargo run --release --example generate_video [CHECKPOINT]`
//!
//! Without a checkpoint a short run is trained first.

use std::path::PathBuf;

use cpnet::config::TrainConfig;
use cpnet::data::make_toy_dataset;
use cpnet::inference::TrainedModel;
use cpnet::train::{prepare_clips, train};

fn main() -> cpnet::Result<()> {
    let checkpoint = match std::env::args().nth(1) {
        Some(path) => PathBuf::from(path),
        None => {
            let mut config = TrainConfig {
                iterations: 100,
                checkpoint_interval: 100,
                output_dir: std::env::temp_dir().join("cpnet-generate"),
                ..Default::default()
            };
            config.data.toy.clips = 1;
            config.data.train_fraction = 1.0;
            config.generator.base_width = 16;
            config.discriminator.base_width = 16;
            config.predictor.base_width = 8;
            let (clips, _) = prepare_clips(&config)?;
            train(&config, clips, None)?.checkpoints.pop().unwrap()
        }
    };
    let model = TrainedModel::load(&checkpoint)?;
    let source = make_toy_dataset(11, 1, 24, 64)?.remove(0);
    let video = model.generate_video("driven", source.landmarks(), Some(source.frames()), source.frame_rate)?;
    let out = std::env::temp_dir().join("cpnet-video");
    video.write_dir(&out)?;
    println!("{} frames from a {}-frame track -> {}", video.len(), source.len(), out.display());
    Ok(())
}
