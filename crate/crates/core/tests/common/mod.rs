#![allow(dead_code)]

pub mod gradcheck;
pub mod metric_fixture;

use std::path::Path;

use cpnet::config::TrainConfig;
use cpnet::disc::DiscriminatorConfig;

/// A run small enough for tests: 32x32 toy clips and narrow networks.
pub fn tiny_config(output_dir: &Path) -> TrainConfig {
    let mut c = TrainConfig {
        iterations: 10,
        batch_size: 1,
        crop_size: 32,
        checkpoint_interval: 500,
        log_interval: 1,
        output_dir: output_dir.to_path_buf(),
        ..Default::default()
    };
    c.data.toy.clips = 2;
    c.data.toy.frames = 14;
    c.data.toy.resolution = 32;
    c.generator.base_width = 8;
    c.generator.encoder_levels = 3;
    c.generator.transition_blocks = 1;
    c.discriminator = DiscriminatorConfig {
        base_width: 8,
        levels: 2,
        sequence_length: 3,
    };
    c.predictor.base_width = 4;
    c.condenser.dim = 16;
    c
}
