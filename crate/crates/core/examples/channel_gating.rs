//! Condenses a reference-frame embedding into per-channel gates and applies
//! them to a feature map.
//!
//! `cargo run --example channel_gating`

use cpnet::condenser::{gating_weights, recalibrate_map, CondenserHead, EmbeddingProvider, StubProvider};
use cpnet::data::make_toy_dataset;
use cpnet::nn::Tensor;

fn main() -> cpnet::Result<()> {
    let clips = make_toy_dataset(5, 2, 14, 64)?;
    let provider = StubProvider::new(32, 9)?;
    let head = CondenserHead::new(provider.dim(), vec![8, 16]);
    let params = head.init::<f64>(2);
    for clip in &clips {
        let v: Vec<f64> = provider.embed(&clip.frames()[0])?.into_iter().map(f64::from).collect();
        let gates = gating_weights(&head, &params, &v)?;
        for (layer, w) in gates.iter().enumerate() {
            let (lo, hi) = w.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            println!("{} layer {layer}: {} gates in [{lo:.3}, {hi:.3}]", clip.name, w.len());
        }
        let features = Tensor::<f64>::from_fn(&[8, 4, 4], |i| (i % 5) as f64 - 2.0);
        let recalibrated = recalibrate_map(&features, &gates[0])?;
        println!("  feature energy {:.2} -> {:.2}", energy(&features), energy(&recalibrated));
    }
    Ok(())
}

fn energy(t: &Tensor<f64>) -> f64 {
    t.data().iter().map(|v| v * v).sum()
}
