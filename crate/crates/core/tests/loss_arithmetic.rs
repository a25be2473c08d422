use cpnet::losses::{
    lsgan_discriminator_loss, lsgan_generator_loss, perceptual_loss, probability_consistency_loss, temporal_loss_d,
    temporal_loss_g, total_generator_loss, weighted_total, Extractor, LossComponents, LossWeights,
};
use cpnet::nn::{Graph, Tensor};
use proptest::prelude::*;

fn full(shape: &[usize], v: f64) -> Tensor<f64> {
    Tensor::full(shape, v)
}

const SCORES: [usize; 4] = [2, 1, 4, 4];

#[test]
fn discriminator_side_at_constant_scores() {
    let g = Graph::<f64>::new();
    for (real, fake, expected) in [(1.0, 0.0, 0.0), (0.0, 1.0, 2.0), (0.5, 0.5, 0.5)] {
        let r = g.constant(full(&SCORES, real));
        let f = g.constant(full(&SCORES, fake));
        assert_eq!(lsgan_discriminator_loss(r, f).item(), expected);
        assert_eq!(temporal_loss_d(r, f).item(), expected);
    }
}

#[test]
fn generator_side_at_constant_scores() {
    let g = Graph::<f64>::new();
    for (fake, expected) in [(1.0, 0.0), (0.0, 1.0), (0.25, 0.5625)] {
        let f = g.constant(full(&SCORES, fake));
        assert_eq!(lsgan_generator_loss(f).item(), expected);
        assert_eq!(temporal_loss_g(f).item(), expected);
    }
}

#[test]
fn default_weights_on_unit_components_give_seven_point_one() {
    let c = LossComponents { adv: 1.0, r: 1.0, t: 1.0, p: 1.0 };
    let total = total_generator_loss(&LossWeights::default(), &c);
    assert!((total - 7.1).abs() < 1e-12, "{total}");
    assert_eq!(total_generator_loss(&LossWeights::default(), &LossComponents::default()), 0.0);

    let g = Graph::<f64>::new();
    let one = || Some(g.constant(Tensor::scalar(1.0)));
    let v = weighted_total(&LossWeights::default(), one(), one(), one(), one()).unwrap();
    assert!((v.item() - 7.1).abs() < 1e-12);
}

#[test]
fn perceptual_identity_extractor_sums_absolute_differences() {
    let g = Graph::<f64>::new();
    let s = g.constant(full(&[1, 1, 2, 2], 0.6));
    let y = g.constant(full(&[1, 1, 2, 2], 0.5));
    let v = perceptual_loss(&Extractor::Identity, s, y).unwrap().item();
    assert!((v - 0.4).abs() < 1e-12, "{v}");
    assert_eq!(perceptual_loss(&Extractor::Identity, s, s).unwrap().item(), 0.0);
}

#[test]
fn probability_consistency_of_maps_three_apart() {
    // A single entry differing by 3 gives an L2 distance of exactly 3.
    let g = Graph::<f64>::new();
    let mut a = Tensor::zeros(&[1, 1, 4, 4]);
    a.data_mut()[5] = 3.0;
    let a = g.constant(a);
    let b = g.constant(Tensor::zeros(&[1, 1, 4, 4]));
    assert_eq!(probability_consistency_loss(a, b).unwrap().item(), 3.0);
    assert_eq!(probability_consistency_loss(b, a).unwrap().item(), 3.0);
    assert_eq!(probability_consistency_loss(a, a).unwrap().item(), 0.0);
}

fn tensor(shape: &'static [usize]) -> impl Strategy<Value = Tensor<f64>> {
    let n: usize = shape.iter().product();
    proptest::collection::vec(-1.0f64..2.0, n).prop_map(move |d| Tensor::new(shape, d).unwrap())
}

proptest! {
    #[test]
    fn losses_are_non_negative(r in tensor(&SCORES), f in tensor(&SCORES)) {
        let g = Graph::<f64>::new();
        let (r, f) = (g.constant(r), g.constant(f));
        prop_assert!(lsgan_discriminator_loss(r, f).item() >= 0.0);
        prop_assert!(lsgan_generator_loss(f).item() >= 0.0);
    }

    #[test]
    fn perceptual_loss_is_symmetric(s in tensor(&[1, 3, 8, 8]), y in tensor(&[1, 3, 8, 8])) {
        let g = Graph::<f64>::new();
        let (s, y) = (g.constant(s), g.constant(y));
        let e = Extractor::Stub { seed: 1 };
        let a = perceptual_loss(&e, s, y).unwrap().item();
        let b = perceptual_loss(&e, y, s).unwrap().item();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn total_is_linear_in_each_weight(
        c in (0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0, 0.0f64..5.0),
        k in 0.0f64..10.0,
    ) {
        let c = LossComponents { adv: c.0, r: c.1, t: c.2, p: c.3 };
        let base = LossWeights::default();
        let scaled = LossWeights { lambda_r: base.lambda_r * k, ..base };
        let delta = total_generator_loss(&scaled, &c) - total_generator_loss(&base, &c);
        prop_assert!((delta - (k - 1.0) * base.lambda_r * c.r).abs() < 1e-9);
    }
}
