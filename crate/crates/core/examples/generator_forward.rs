//! Runs an untrained generator on one conditioning window, with and without
//! embedding-driven channel gating.
//!
//! `cargo run --example generator_forward`

use cpnet::condenser::{gating_weights, CondenserHead, EmbeddingProvider, StubProvider};
use cpnet::data::{build_window, make_toy_dataset};
use cpnet::generator::{generate_frame, Generator, GeneratorConfig};

fn main() -> cpnet::Result<()> {
    let clip = make_toy_dataset(1, 1, 14, 64)?.remove(0);
    let window = build_window(&clip, 6, false)?;
    let generator = Generator::new(GeneratorConfig::default())?;
    println!("generator: {} parameters", generator.num_params());
    for (i, (c, h, w)) in generator.encoder_shapes().into_iter().enumerate() {
        println!("  encoder level {i}: {c} x {h} x {w}");
    }
    let params = generator.init::<f32>(0);

    let provider = StubProvider::new(64, 0)?;
    let embedding: Vec<f64> = provider.embed(&clip.frames()[0])?.into_iter().map(f64::from).collect();
    let head = CondenserHead::new(provider.dim(), generator.hooked_channels());
    let gates: Vec<Vec<f32>> = gating_weights(&head, &head.init(1), &embedding)?
        .into_iter()
        .map(|w| w.into_iter().map(|v| v as f32).collect())
        .collect();

    let plain = generate_frame(&generator, &params, &window, None)?;
    let gated = generate_frame(&generator, &params, &window, Some(&gates))?;
    println!("window of {} channels -> frame {:?}", window.channels(), (plain.channels(), plain.height(), plain.width()));
    println!("mean |gated - ungated| = {:.5}", gated.mean_abs_diff(&plain));
    Ok(())
}
