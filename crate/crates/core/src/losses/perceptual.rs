//! Frozen feature extractors for the perceptual reconstruction loss.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::nn::params::INIT_STD;
use crate::nn::{Conv2d, Element, Graph, Initializer, ParamStore, Var};
use crate::weights::load_safetensors;

const VGG_BACKEND: &str = "vgg";
pub const IMAGENET_MEAN: [f64; 3] = [0.485, 0.456, 0.406];
pub const IMAGENET_STD: [f64; 3] = [0.229, 0.224, 0.225];
/// Activations tapped from a VGG feature stack.
pub const VGG_TAPS: [&str; 4] = ["relu1_2", "relu2_2", "relu3_2", "relu4_2"];

/// A VGG-style convolution stack read from `features.{i}.weight` / `.bias`
/// tensors (torchvision numbering, where a gap of three indices between
/// convolutions marks a max-pool).
#[derive(Clone, Debug)]
pub struct VggExtractor {
    path: PathBuf,
    /// Convolutions up to the last tap, each followed by ReLU; `true` when a
    /// 2x2 max-pool follows the ReLU.
    convs: Vec<(Conv2d, bool, String)>,
    params: ParamStore<f32>,
}

impl VggExtractor {
    pub fn load(path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::BackendLoad {
            backend: VGG_BACKEND,
            path: path.to_path_buf(),
            reason,
        };
        let tensors = load_safetensors(path, VGG_BACKEND)?;
        let mut indices: Vec<usize> = tensors
            .keys()
            .filter_map(|k| k.strip_prefix("features.")?.strip_suffix(".weight")?.parse().ok())
            .collect();
        indices.sort_unstable();
        let mut convs = Vec::new();
        let mut params = ParamStore::new();
        let (mut block, mut pos) = (1, 0);
        let last_tap = VGG_TAPS[VGG_TAPS.len() - 1];
        for (j, &i) in indices.iter().enumerate() {
            pos += 1;
            let tag = format!("relu{block}_{pos}");
            let w = &tensors[&format!("features.{i}.weight")];
            let &[cout, cin, k, k2] = w.shape() else {
                return Err(fail(format!("features.{i}.weight is not a 4-D kernel")));
            };
            if k != k2 || k % 2 == 0 {
                return Err(fail(format!("features.{i}.weight has a {k}x{k2} kernel")));
            }
            if let Some((prev, _, _)) = convs.last() {
                let prev: &Conv2d = prev;
                if prev.out_channels != cin {
                    return Err(fail(format!("features.{i} expects {cin} inputs after {} channels", prev.out_channels)));
                }
            } else if cin != 3 {
                return Err(fail(format!("first convolution takes {cin} channels, expected 3")));
            }
            let bias = tensors
                .get(&format!("features.{i}.bias"))
                .ok_or_else(|| fail(format!("missing features.{i}.bias")))?;
            let conv = Conv2d::new(format!("vgg/features.{i}"), cin, cout, k);
            params.insert(conv.weight_name(), w.clone());
            params.insert(conv.bias_name(), bias.clone());
            let pooled = indices.get(j + 1).is_some_and(|&next| next - i == 3);
            let done = tag == last_tap;
            convs.push((conv, pooled, tag));
            if done {
                return Ok(VggExtractor {
                    path: path.to_path_buf(),
                    convs,
                    params,
                });
            }
            if pooled {
                block += 1;
                pos = 0;
            }
        }
        Err(fail(format!("the stack ends before {last_tap}")))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn params(&self) -> &ParamStore<f32> {
        &self.params
    }

    fn features<'g, E: Element>(&self, g: &'g Graph<E>, x: Var<'g, E>) -> Result<Vec<Var<'g, E>>> {
        let store = self.params.cast::<E>();
        let p = store.bind(g, "vgg", false);
        let scale: Vec<f64> = IMAGENET_STD.iter().map(|s| 1.0 / s).collect();
        let shift: Vec<f64> = IMAGENET_MEAN.iter().zip(&IMAGENET_STD).map(|(m, s)| -m / s).collect();
        let mut h = x.channel_affine(&scale, &shift)?;
        let mut out = Vec::new();
        for (conv, pooled, tag) in &self.convs {
            h = conv.forward(&p, h)?.relu();
            if VGG_TAPS.contains(&tag.as_str()) {
                out.push(h);
            }
            if *pooled {
                h = h.max_pool2d(2)?;
            }
        }
        Ok(out)
    }
}

/// Frozen feature extractor `φ`; the loss compares images layer by layer.
#[derive(Clone, Debug)]
pub enum Extractor {
    /// Pixels, then two fixed random conv+ReLU layers (the second strided).
    Stub { seed: u64 },
    /// A single layer that returns the pixels unchanged.
    Identity,
    Vgg(VggExtractor),
}

impl Extractor {
    fn stub_layers() -> [Conv2d; 2] {
        [
            Conv2d::new("stub/conv1", 3, 8, 3),
            Conv2d {
                stride: 2,
                ..Conv2d::new("stub/conv2", 8, 16, 3)
            },
        ]
    }

    /// Parameters of the stub; fixed by its seed.
    pub fn stub_params<E: Element>(seed: u64) -> ParamStore<E> {
        let init = Initializer::new(seed);
        let mut store = ParamStore::new();
        for layer in Self::stub_layers() {
            // Wider than the trainable networks so the random features are not tiny.
            layer.init(&mut store, &init, 10.0 * INIT_STD);
        }
        store
    }

    /// Feature maps of `[N, 3, H, W]` images. The identity extractor takes any channel count.
    pub fn features<'g, E: Element>(&self, x: Var<'g, E>) -> Result<Vec<Var<'g, E>>> {
        let shape = x.shape();
        let channels_ok = matches!(self, Extractor::Identity) || shape.get(1) == Some(&3);
        if shape.len() != 4 || !channels_ok {
            return Err(Error::shape("perceptual features", format!("expected [N, 3, H, W], got {shape:?}")));
        }
        match self {
            Extractor::Identity => Ok(vec![x]),
            Extractor::Stub { seed } => {
                let store = Self::stub_params::<E>(*seed);
                let p = store.bind(x.graph(), "stub", false);
                let [c1, c2] = Self::stub_layers();
                let f1 = c1.forward(&p, x)?.relu();
                let f2 = c2.forward(&p, f1)?.relu();
                Ok(vec![x, f1, f2])
            }
            Extractor::Vgg(vgg) => vgg.features(x.graph(), x),
        }
    }
}

/// `(1/L) Σ_l ‖φ_l(s) − φ_l(y)‖₁` with the L1 norm summed over each layer's
/// elements, averaged over the batch.
pub fn perceptual_loss<'g, E: Element>(extractor: &Extractor, s: Var<'g, E>, y: Var<'g, E>) -> Result<Var<'g, E>> {
    if s.shape() != y.shape() {
        return Err(Error::shape(
            "perceptual_loss",
            format!("{:?} vs {:?}", s.shape(), y.shape()),
        ));
    }
    let fs = extractor.features(s)?;
    let fy = extractor.features(y)?;
    let layers = fs.len();
    let terms = fs
        .into_iter()
        .zip(fy)
        .map(|(a, b)| Ok(a.sub(b)?.l1_norm_per_sample()?.mean()))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::nn::sum_all(&terms)?.scale(1.0 / layers as f64))
}
