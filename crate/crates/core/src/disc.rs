//! Patch discriminators over (condition, candidate) pairs: one scores single
//! frames, the other a channel-stacked run of consecutive frames.

use serde::{Deserialize, Serialize};

use crate::data::{ConditioningWindow, Image, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::nn::params::{INIT_STD, LEAKY_SLOPE, NORM_EPS};
use crate::nn::{concat_channels, Bound, Conv2d, Element, Graph, Initializer, ParamStore, Tensor, Var};

pub const FRAME_NAMESPACE: &str = "disc_frame";
pub const SEQUENCE_NAMESPACE: &str = "disc_seq";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub base_width: usize,
    /// Number of stride-2 levels; a `R x R` input yields an `R/2^levels` score grid.
    pub levels: usize,
    /// Frames per sequence seen by the sequence discriminator.
    pub sequence_length: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        DiscriminatorConfig {
            base_width: 32,
            levels: 3,
            sequence_length: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiscriminatorKind {
    Frame,
    Sequence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    pub kind: DiscriminatorKind,
    pub config: DiscriminatorConfig,
    /// Channels of the conditioning part of each frame.
    pub condition_channels: usize,
    levels: Vec<Conv2d>,
    out: Conv2d,
}

impl Discriminator {
    pub fn new(kind: DiscriminatorKind, config: DiscriminatorConfig, condition_channels: usize) -> Result<Self> {
        if config.levels == 0 || config.base_width == 0 {
            return Err(Error::Config("discriminator needs at least one level and a positive width".into()));
        }
        let frames = match kind {
            DiscriminatorKind::Frame => 1,
            DiscriminatorKind::Sequence => {
                if config.sequence_length < 2 {
                    return Err(Error::Config(format!(
                        "sequence discriminator needs at least 2 frames, got {}",
                        config.sequence_length
                    )));
                }
                config.sequence_length
            }
        };
        let ns = match kind {
            DiscriminatorKind::Frame => FRAME_NAMESPACE,
            DiscriminatorKind::Sequence => SEQUENCE_NAMESPACE,
        };
        let in_channels = frames * (condition_channels + 3);
        let w = config.base_width;
        let levels = (0..config.levels)
            .map(|i| {
                let cin = if i == 0 { in_channels } else { w << (i - 1) };
                Conv2d::down(format!("{ns}/conv{}", i + 1), cin, w << i)
            })
            .collect();
        let out = Conv2d::new(format!("{ns}/out"), w << (config.levels - 1), 1, 3);
        Ok(Discriminator {
            kind,
            config,
            condition_channels,
            levels,
            out,
        })
    }

    pub fn frame(config: DiscriminatorConfig) -> Result<Self> {
        Self::new(DiscriminatorKind::Frame, config, WINDOW_LEN)
    }

    pub fn sequence(config: DiscriminatorConfig) -> Result<Self> {
        Self::new(DiscriminatorKind::Sequence, config, WINDOW_LEN)
    }

    pub fn namespace(&self) -> &'static str {
        match self.kind {
            DiscriminatorKind::Frame => FRAME_NAMESPACE,
            DiscriminatorKind::Sequence => SEQUENCE_NAMESPACE,
        }
    }

    /// Frames scored together: 1, or the sequence length.
    pub fn frames(&self) -> usize {
        match self.kind {
            DiscriminatorKind::Frame => 1,
            DiscriminatorKind::Sequence => self.config.sequence_length,
        }
    }

    pub fn num_params(&self) -> usize {
        self.levels.iter().chain([&self.out]).map(|l| l.num_params()).sum()
    }

    pub fn init<E: Element>(&self, seed: u64) -> ParamStore<E> {
        let init = Initializer::new(seed);
        let mut store = ParamStore::new();
        for layer in self.levels.iter().chain([&self.out]) {
            layer.init(&mut store, &init, INIT_STD);
        }
        store
    }

    /// Scores `[M, C_cond, H, W]` conditions against `[M, 3, H, W]` candidates.
    /// For the sequence kind `M = N·T` with each run of `T` rows one sequence;
    /// the result is `[N, 1, h, w]`.
    pub fn forward<'g, E: Element>(
        &self,
        p: &Bound<'g, E>,
        condition: Var<'g, E>,
        candidate: Var<'g, E>,
    ) -> Result<Var<'g, E>> {
        let (cs, ys) = (condition.shape(), candidate.shape());
        if cs.len() != 4 || ys.len() != 4 || cs[0] != ys[0] || cs[2..] != ys[2..] {
            return Err(Error::shape(
                "discriminator",
                format!("condition {cs:?} and candidate {ys:?} do not pair up"),
            ));
        }
        if cs[1] != self.condition_channels || ys[1] != 3 {
            return Err(Error::shape(
                "discriminator",
                format!(
                    "expected {} condition and 3 candidate channels, got {} and {}",
                    self.condition_channels, cs[1], ys[1]
                ),
            ));
        }
        let t = self.frames();
        if cs[0] % t != 0 {
            return Err(Error::shape(
                "discriminator",
                format!("{} frames do not split into sequences of {t}", cs[0]),
            ));
        }
        let mut h = concat_channels(&[condition, candidate])?;
        if t > 1 {
            h = h.reshape(&[cs[0] / t, t * (cs[1] + 3), cs[2], cs[3]])?;
        }
        for (i, conv) in self.levels.iter().enumerate() {
            h = conv.forward(p, h)?;
            if i > 0 {
                h = h.instance_norm(NORM_EPS)?;
            }
            h = h.leaky_relu(LEAKY_SLOPE);
        }
        self.out.forward(p, h)
    }
}

fn stack_inputs(windows: &[&ConditioningWindow], frames: &[&Image]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    if windows.len() != frames.len() || windows.is_empty() {
        return Err(Error::shape(
            "discriminator inputs",
            format!("{} windows but {} candidate frames", windows.len(), frames.len()),
        ));
    }
    let conds: Vec<Tensor<f32>> = windows.iter().map(|w| w.landmark_tensor()).collect();
    let cands: Vec<Tensor<f32>> = frames.iter().map(|f| f.to_tensor()).collect();
    Ok((Tensor::stack(&conds)?, Tensor::stack(&cands)?))
}

fn score(disc: &Discriminator, params: &ParamStore<f32>, windows: &[&ConditioningWindow], frames: &[&Image]) -> Result<Tensor<f32>> {
    let (cond, cand) = stack_inputs(windows, frames)?;
    let g = Graph::new();
    let p = params.bind(&g, disc.namespace(), false);
    let s = disc.forward(&p, g.constant(cond), g.constant(cand))?;
    Ok((*s.value()).clone())
}

/// Patch scores `[1, 1, h, w]` of one candidate frame under its window.
pub fn score_frame(
    disc: &Discriminator,
    params: &ParamStore<f32>,
    window: &ConditioningWindow,
    candidate: &Image,
) -> Result<Tensor<f32>> {
    if disc.kind != DiscriminatorKind::Frame {
        return Err(Error::invalid("score_frame needs a frame discriminator"));
    }
    score(disc, params, &[window], &[candidate])
}

/// Patch scores `[1, 1, h, w]` of a run of consecutive candidate frames.
pub fn score_sequence(
    disc: &Discriminator,
    params: &ParamStore<f32>,
    windows: &[ConditioningWindow],
    candidates: &[Image],
) -> Result<Tensor<f32>> {
    if disc.kind != DiscriminatorKind::Sequence {
        return Err(Error::invalid("score_sequence needs a sequence discriminator"));
    }
    let t = disc.frames();
    if windows.len() != t || candidates.len() != t {
        return Err(Error::shape(
            "score_sequence",
            format!("expected {t} windows and frames, got {} and {}", windows.len(), candidates.len()),
        ));
    }
    let ws: Vec<&ConditioningWindow> = windows.iter().collect();
    let cs: Vec<&Image> = candidates.iter().collect();
    score(disc, params, &ws, &cs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_length_must_be_at_least_two() {
        let config = DiscriminatorConfig {
            sequence_length: 1,
            ..Default::default()
        };
        assert!(Discriminator::sequence(config.clone()).is_err());
        assert!(Discriminator::frame(config).is_ok());
    }

    #[test]
    fn input_channels_stack_condition_and_candidate() {
        let d = Discriminator::sequence(DiscriminatorConfig::default()).unwrap();
        let params = d.init::<f32>(0);
        assert_eq!(params.get("disc_seq/conv1/weight").unwrap().shape(), &[32, 50, 4, 4]);
        let d = Discriminator::frame(DiscriminatorConfig::default()).unwrap();
        let params = d.init::<f32>(0);
        assert_eq!(params.get("disc_frame/conv1/weight").unwrap().shape(), &[32, 10, 4, 4]);
    }
}
