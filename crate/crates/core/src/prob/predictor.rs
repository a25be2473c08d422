use serde::{Deserialize, Serialize};

use super::kernel::{MapSource, ProbabilityMap};
use crate::data::Image;
use crate::error::{Error, Result};
use crate::nn::params::{INIT_STD, LEAKY_SLOPE, NORM_EPS};
use crate::nn::{concat_channels, Bound, Conv2d, Element, Graph, Initializer, ParamStore, Var};

pub const NAMESPACE: &str = "predictor";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub base_width: usize,
    /// Side length of the square frames the predictor accepts.
    pub resolution: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            base_width: 16,
            resolution: 64,
        }
    }
}

/// Small encoder/decoder mapping an RGB frame to a landmark density map:
/// three stride-2 levels down, skip concatenations on the way up and a
/// softplus output so predictions are non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictor {
    pub config: PredictorConfig,
    down1: Conv2d,
    down2: Conv2d,
    down3: Conv2d,
    mid: Conv2d,
    up2: Conv2d,
    up1: Conv2d,
    up0: Conv2d,
    out: Conv2d,
}

impl Predictor {
    pub fn new(config: PredictorConfig) -> Result<Self> {
        let w = config.base_width;
        if w < 2 || w % 2 != 0 {
            return Err(Error::Config(format!(
                "predictor base_width must be an even number >= 2, got {w}"
            )));
        }
        if config.resolution < 8 || config.resolution % 8 != 0 {
            return Err(Error::Config(format!(
                "predictor resolution must be a positive multiple of 8, got {}",
                config.resolution
            )));
        }
        let name = |s: &str| format!("{NAMESPACE}/{s}");
        Ok(Predictor {
            down1: Conv2d::down(name("down1"), 3, w),
            down2: Conv2d::down(name("down2"), w, 2 * w),
            down3: Conv2d::down(name("down3"), 2 * w, 4 * w),
            mid: Conv2d::new(name("mid"), 4 * w, 4 * w, 3),
            up2: Conv2d::new(name("up2"), 6 * w, 3 * w, 3),
            up1: Conv2d::new(name("up1"), 4 * w, 3 * w / 2, 3),
            up0: Conv2d::new(name("up0"), 3 * w / 2, w, 3),
            out: Conv2d::new(name("out"), w, 1, 3),
            config,
        })
    }

    pub fn layers(&self) -> [&Conv2d; 8] {
        [
            &self.down1, &self.down2, &self.down3, &self.mid, &self.up2, &self.up1, &self.up0, &self.out,
        ]
    }

    pub fn num_params(&self) -> usize {
        self.layers().iter().map(|l| l.num_params()).sum()
    }

    pub fn init<E: Element>(&self, seed: u64) -> ParamStore<E> {
        let init = Initializer::new(seed);
        let mut store = ParamStore::new();
        for layer in self.layers() {
            layer.init(&mut store, &init, INIT_STD);
        }
        store
    }

    /// `[N, 3, R, R] -> [N, 1, R, R]`.
    pub fn forward<'g, E: Element>(&self, p: &Bound<'g, E>, x: Var<'g, E>) -> Result<Var<'g, E>> {
        let shape = x.shape();
        let r = self.config.resolution;
        if shape.len() != 4 || shape[1] != 3 || shape[2] != r || shape[3] != r {
            return Err(Error::shape(
                "predictor",
                format!("expected [N, 3, {r}, {r}], got {shape:?}"),
            ));
        }
        let d1 = self.down1.forward(p, x)?.leaky_relu(LEAKY_SLOPE);
        let d2 = self.down2.forward(p, d1)?.instance_norm(NORM_EPS)?.leaky_relu(LEAKY_SLOPE);
        let d3 = self.down3.forward(p, d2)?.instance_norm(NORM_EPS)?.leaky_relu(LEAKY_SLOPE);
        let m = self.mid.forward(p, d3)?.instance_norm(NORM_EPS)?.relu();
        let u2 = concat_channels(&[m.upsample_nearest(2)?, d2])?;
        let u2 = self.up2.forward(p, u2)?.instance_norm(NORM_EPS)?.relu();
        let u1 = concat_channels(&[u2.upsample_nearest(2)?, d1])?;
        let u1 = self.up1.forward(p, u1)?.instance_norm(NORM_EPS)?.relu();
        let u0 = self.up0.forward(p, u1.upsample_nearest(2)?)?.relu();
        Ok(self.out.forward(p, u0)?.softplus())
    }
}

/// Predicted density map of one RGB frame.
pub fn predict_map(predictor: &Predictor, params: &ParamStore<f32>, image: &Image) -> Result<ProbabilityMap> {
    if image.channels() != 3 {
        return Err(Error::shape("predict_map", format!("expected an RGB frame, got {image:?}")));
    }
    let g = Graph::new();
    let p = params.bind(&g, NAMESPACE, false);
    let x = g.constant(image.to_tensor::<f32>().reshape(&[1, 3, image.height(), image.width()])?);
    let y = predictor.forward(&p, x)?;
    ProbabilityMap::from_tensor(&y.value(), MapSource::Predicted)
}

/// The predictor objective on batched maps `[N, 1, H, W]`:
/// `mean_n ‖P(I) − y_p‖₂ − λ · mean_n ‖P(I′) − P(I)‖₂`, where `I′` is a
/// generated frame. The second term rewards telling real and fake apart, so
/// the value can be negative.
pub fn predictor_objective<'g, E: Element>(
    pred_real: Var<'g, E>,
    target: Var<'g, E>,
    pred_fake: Var<'g, E>,
    lambda_dmp: f64,
) -> Result<Var<'g, E>> {
    if pred_real.shape() != target.shape() || pred_real.shape() != pred_fake.shape() {
        return Err(Error::shape(
            "predictor_objective",
            format!(
                "maps differ: {:?}, {:?}, {:?}",
                pred_real.shape(),
                target.shape(),
                pred_fake.shape()
            ),
        ));
    }
    if !(lambda_dmp >= 0.0) {
        return Err(Error::invalid(format!("lambda_dmp must be >= 0, got {lambda_dmp}")));
    }
    let fit = pred_real.sub(target)?.l2_norm_per_sample()?.mean();
    let margin = pred_fake.sub(pred_real)?.l2_norm_per_sample()?.mean();
    fit.sub(margin.scale(lambda_dmp))
}

/// [`predictor_objective`] on single maps.
pub fn predictor_loss(
    pred_real: &ProbabilityMap,
    target: &ProbabilityMap,
    pred_fake: &ProbabilityMap,
    lambda_dmp: f64,
) -> Result<f64> {
    let g = Graph::<f64>::new();
    let v = predictor_objective(
        g.constant(pred_real.to_tensor()),
        g.constant(target.to_tensor()),
        g.constant(pred_fake.to_tensor()),
        lambda_dmp,
    )?;
    Ok(v.item())
}
