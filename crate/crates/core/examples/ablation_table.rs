//! Runs the lambda_p grid at smoke scale and prints the resulting table.
//!
//! `cargo run --release --example ablation_table`

use cpnet::ablation::{run_ablation, AblationTable};
use cpnet::config::TrainConfig;
use cpnet::train::prepare_clips;

fn main() -> cpnet::Result<()> {
    let mut config = TrainConfig {
        iterations: 20,
        crop_size: 32,
        checkpoint_interval: 20,
        output_dir: std::env::temp_dir().join("cpnet-ablation"),
        ..Default::default()
    };
    config.data.toy.clips = 2;
    config.data.toy.frames = 14;
    config.data.toy.resolution = 32;
    config.data.train_fraction = 0.5;
    config.generator.base_width = 8;
    config.generator.encoder_levels = 3;
    config.discriminator.base_width = 8;
    config.predictor.base_width = 4;
    let (train_clips, eval_clips) = prepare_clips(&config)?;
    let result = run_ablation(AblationTable::LambdaP, &config, &train_clips, &eval_clips);
    print!("{}", result.table());
    println!("{} of {} rows complete", result.complete_rows(), result.rows.len());
    Ok(())
}
