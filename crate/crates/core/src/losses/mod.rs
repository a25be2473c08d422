//! Adversarial, perceptual, temporal and probability-consistency objectives.

pub mod perceptual;

pub use perceptual::{perceptual_loss, Extractor, VggExtractor};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{sum_all, Element, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_adv: f64,
    pub lambda_r: f64,
    pub lambda_t: f64,
    pub lambda_p: f64,
    /// Weight of the real/fake separation term in the predictor objective.
    pub lambda_dmp: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_adv: 1.0,
            lambda_r: 5.0,
            lambda_t: 1.0,
            lambda_p: 0.1,
            lambda_dmp: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("lambda_adv", self.lambda_adv),
            ("lambda_r", self.lambda_r),
            ("lambda_t", self.lambda_t),
            ("lambda_p", self.lambda_p),
            ("lambda_dmp", self.lambda_dmp),
        ];
        for (name, v) in all {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Unweighted generator loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub adv: f64,
    pub r: f64,
    pub t: f64,
    pub p: f64,
}

/// `λ_adv·adv + λ_r·r + λ_t·t + λ_p·p`.
pub fn total_generator_loss(weights: &LossWeights, c: &LossComponents) -> f64 {
    weights.lambda_adv * c.adv + weights.lambda_r * c.r + weights.lambda_t * c.t + weights.lambda_p * c.p
}

/// [`total_generator_loss`] on graph values; absent terms contribute nothing.
pub fn weighted_total<'g, E: Element>(
    weights: &LossWeights,
    adv: Option<Var<'g, E>>,
    r: Option<Var<'g, E>>,
    t: Option<Var<'g, E>>,
    p: Option<Var<'g, E>>,
) -> Result<Var<'g, E>> {
    let terms: Vec<Var<'g, E>> = [
        (adv, weights.lambda_adv),
        (r, weights.lambda_r),
        (t, weights.lambda_t),
        (p, weights.lambda_p),
    ]
    .into_iter()
    .filter_map(|(v, w)| v.map(|v| v.scale(w)))
    .collect();
    if terms.is_empty() {
        return Err(Error::invalid("generator objective has no terms"));
    }
    sum_all(&terms)
}

/// `mean((real − 1)²) + mean(fake²)`.
pub fn lsgan_discriminator_loss<'g, E: Element>(real: Var<'g, E>, fake: Var<'g, E>) -> Var<'g, E> {
    real.add_scalar(-1.0).square().mean().add(fake.square().mean()).expect("scalars")
}

/// `mean((fake − 1)²)`.
pub fn lsgan_generator_loss<'g, E: Element>(fake: Var<'g, E>) -> Var<'g, E> {
    fake.add_scalar(-1.0).square().mean()
}

/// The sequence-level counterpart of [`lsgan_discriminator_loss`].
pub fn temporal_loss_d<'g, E: Element>(real: Var<'g, E>, fake: Var<'g, E>) -> Var<'g, E> {
    lsgan_discriminator_loss(real, fake)
}

/// The sequence-level counterpart of [`lsgan_generator_loss`].
pub fn temporal_loss_g<'g, E: Element>(fake: Var<'g, E>) -> Var<'g, E> {
    lsgan_generator_loss(fake)
}

/// Batch mean of `‖P(s) − P(y)‖₂` over `[N, 1, H, W]` maps. The caller runs
/// the predictor with frozen parameters so only `s` receives gradients.
pub fn probability_consistency_loss<'g, E: Element>(map_s: Var<'g, E>, map_y: Var<'g, E>) -> Result<Var<'g, E>> {
    Ok(map_s.sub(map_y)?.l2_norm_per_sample()?.mean())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Graph, Tensor};

    #[test]
    fn weights_reject_negative_values() {
        let w = LossWeights {
            lambda_t: -1.0,
            ..Default::default()
        };
        assert!(w.validate().is_err());
        assert!(LossWeights::default().validate().is_ok());
    }

    #[test]
    fn weighted_total_skips_missing_terms() {
        let g = Graph::<f64>::new();
        let one = g.constant(Tensor::scalar(1.0));
        let v = weighted_total(&LossWeights::default(), Some(one), Some(one), None, None).unwrap();
        assert_eq!(v.item(), 6.0);
    }
}
