//! Trains every network jointly on one toy clip and reports the loss log and
//! the train-set scores.
//!
//! `cargo run --release --example train_toy [ITERATIONS]`

use cpnet::config::TrainConfig;
use cpnet::inference::TrainedModel;
use cpnet::metrics::{evaluate_corpus, Metric};
use cpnet::model::Cpnet;
use cpnet::train::{prepare_clips, train};

fn main() -> cpnet::Result<()> {
    let iterations = std::env::args().nth(1).map_or(Ok(300), |v| v.parse()).expect("iteration count");
    let mut config = TrainConfig {
        iterations,
        log_interval: 50,
        checkpoint_interval: iterations,
        output_dir: std::env::temp_dir().join("cpnet-train-toy"),
        ..Default::default()
    };
    config.data.toy.clips = 1;
    config.data.train_fraction = 1.0;
    config.generator.base_width = 16;
    config.discriminator.base_width = 16;
    config.predictor.base_width = 8;

    let (clips, _) = prepare_clips(&config)?;
    let outcome = train(&config, clips.clone(), None)?;
    for row in &outcome.rows {
        println!("iteration {:>5}  total {:>9.3}  L_r {:?}", row.iteration, row.total, row.l_r);
    }
    let model = TrainedModel::new(Cpnet::from_config(&config)?, outcome.final_checkpoint.params);
    let report = evaluate_corpus(&model, &clips, &[Metric::Ssim, Metric::Psnr])?;
    println!("train set: SSIM {:.4}, PSNR {:.2} dB", report.ssim, report.psnr);
    println!("checkpoint: {}", outcome.checkpoints.last().unwrap().display());
    Ok(())
}
