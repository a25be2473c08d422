//! Evaluates the training objectives on small tensors and scores a perturbed
//! toy frame with PSNR and SSIM.
//!
//! `cargo run --example losses_and_metrics`

use cpnet::data::make_toy_dataset;
use cpnet::losses::{
    lsgan_discriminator_loss, lsgan_generator_loss, perceptual_loss, probability_consistency_loss,
    total_generator_loss, Extractor, LossComponents, LossWeights,
};
use cpnet::metrics::{psnr, ssim};
use cpnet::nn::{Graph, Tensor};

fn main() -> cpnet::Result<()> {
    let g = Graph::<f64>::new();
    let scores = |v| g.constant(Tensor::full(&[1, 1, 4, 4], v));
    println!("D loss, real 0.9 / fake 0.2: {:.4}", lsgan_discriminator_loss(scores(0.9), scores(0.2)).item());
    println!("G loss, fake 0.2: {:.4}", lsgan_generator_loss(scores(0.2)).item());

    let clip = make_toy_dataset(2, 1, 14, 64)?.remove(0);
    let real = &clip.frames()[0];
    let mut noisy = real.clone();
    for (i, v) in noisy.data_mut().iter_mut().enumerate() {
        *v = (*v + if i % 2 == 0 { 0.03 } else { -0.03 }).clamp(0.0, 1.0);
    }
    let (s, y) = (g.constant(noisy.to_tensor::<f64>().reshape(&[1, 3, 64, 64])?), g.constant(real.to_tensor::<f64>().reshape(&[1, 3, 64, 64])?));
    println!("perceptual (stub extractor): {:.4}", perceptual_loss(&Extractor::Stub { seed: 0 }, s, y)?.item());
    let zero = g.constant(Tensor::zeros(&[1, 1, 8, 8]));
    let bump = g.constant(Tensor::from_fn(&[1, 1, 8, 8], |i| if i == 27 { 0.5 } else { 0.0 }));
    println!("map consistency: {:.4}", probability_consistency_loss(bump, zero)?.item());

    let weights = LossWeights::default();
    let c = LossComponents { adv: 0.3, r: 1.2, t: 0.25, p: 0.4 };
    println!("weighted total with default weights {weights:?}: {:.4}", total_generator_loss(&weights, &c));

    println!("noisy frame: PSNR {:.2} dB, SSIM {:.4}", psnr(&noisy, real, 1.0)?, ssim(&noisy, real)?);
    Ok(())
}
