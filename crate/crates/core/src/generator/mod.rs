//! Encoder / residual transition / decoder generator with dense multi-scale
//! skip fusion and optional per-layer channel gating.

use serde::{Deserialize, Serialize};

use crate::data::{ConditioningWindow, Image, WINDOW_LEN};
use crate::error::{Error, Result};
use crate::nn::params::{INIT_STD, LEAKY_SLOPE, NORM_EPS};
use crate::nn::{Bound, Conv2d, Element, Graph, Initializer, ParamStore, Tensor, Var};

pub const NAMESPACE: &str = "generator";
pub const OUTPUT_CHANNELS: usize = 3;
/// Number of encoder levels whose features are fused into later layers.
pub const FUSED_LEVELS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    /// 7 landmark channels, plus 9 when prior RGB frames are fed.
    pub input_channels: usize,
    pub base_width: usize,
    pub encoder_levels: usize,
    pub transition_blocks: usize,
    /// Side length of the square frames the generator produces.
    pub resolution: usize,
    pub dense_fusion: bool,
    pub condenser: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            input_channels: WINDOW_LEN,
            base_width: 32,
            encoder_levels: 4,
            transition_blocks: 3,
            resolution: 64,
            dense_fusion: true,
            condenser: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Transition {
    conv1: Conv2d,
    conv2: Conv2d,
}

/// Layer layout of a generator; parameters live in a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub config: GeneratorConfig,
    encoder: Vec<Conv2d>,
    transitions: Vec<Transition>,
    decoder: Vec<Conv2d>,
    head: Conv2d,
    /// `fusion[l][i]` projects encoder level `i` onto hooked layer `l`.
    fusion: Vec<Vec<Conv2d>>,
}

/// Encoder outputs, shallowest first; the last one is the bottleneck.
pub struct Encoded<'g, E: Element> {
    pub levels: Vec<Var<'g, E>>,
}

impl<'g, E: Element> Encoded<'g, E> {
    /// The features taking part in the dense fusion (`e1..e3`).
    pub fn fused(&self) -> &[Var<'g, E>] {
        &self.levels[..FUSED_LEVELS]
    }

    pub fn bottleneck(&self) -> Var<'g, E> {
        *self.levels.last().expect("at least one level")
    }
}

impl Generator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        let GeneratorConfig {
            input_channels,
            base_width: w,
            encoder_levels: levels,
            transition_blocks,
            resolution,
            ..
        } = config;
        if levels < FUSED_LEVELS {
            return Err(Error::Config(format!(
                "generator needs at least {FUSED_LEVELS} encoder levels, got {levels}"
            )));
        }
        if w < 8 {
            return Err(Error::Config(format!("generator base_width must be >= 8, got {w}")));
        }
        if input_channels == 0 {
            return Err(Error::Config("generator needs at least one input channel".into()));
        }
        if resolution == 0 || resolution % (1 << levels) != 0 {
            return Err(Error::Config(format!(
                "generator resolution {resolution} must be a positive multiple of {}",
                1 << levels
            )));
        }
        let name = |s: String| format!("{NAMESPACE}/{s}");
        let width = |level: usize| w << level;
        let encoder = (0..levels)
            .map(|i| {
                let cin = if i == 0 { input_channels } else { width(i - 1) };
                Conv2d::down(name(format!("enc{}", i + 1)), cin, width(i))
            })
            .collect();
        let cb = width(levels - 1);
        let transitions = (0..transition_blocks)
            .map(|b| Transition {
                conv1: Conv2d::new(name(format!("trans{}/conv1", b + 1)), cb, cb, 3),
                conv2: Conv2d::new(name(format!("trans{}/conv2", b + 1)), cb, cb, 3),
            })
            .collect();
        let decoder = (0..levels - 1)
            .map(|j| {
                let level = levels - 1 - j;
                Conv2d::new(name(format!("dec{}", j + 1)), width(level), width(level - 1), 3)
            })
            .collect();
        let head = Conv2d::new(name("out".into()), w, OUTPUT_CHANNELS, 3);
        let mut gen = Generator {
            config,
            encoder,
            transitions,
            decoder,
            head,
            fusion: Vec::new(),
        };
        gen.fusion = gen
            .hooked_channels()
            .iter()
            .enumerate()
            .map(|(l, &c)| {
                (0..FUSED_LEVELS)
                    .map(|i| Conv2d::new(name(format!("fuse{}/h{}", l + 1, i + 1)), width(i), c, 1))
                    .collect()
            })
            .collect();
        Ok(gen)
    }

    /// Channel count of every transition and decoder layer, in forward order.
    pub fn hooked_channels(&self) -> Vec<usize> {
        self.transitions
            .iter()
            .map(|t| t.conv2.out_channels)
            .chain(self.decoder.iter().map(|d| d.out_channels))
            .collect()
    }

    /// `(channels, height, width)` of each encoder level.
    pub fn encoder_shapes(&self) -> Vec<(usize, usize, usize)> {
        self.encoder
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let side = self.config.resolution >> (i + 1);
                (c.out_channels, side, side)
            })
            .collect()
    }

    fn layers(&self) -> Vec<&Conv2d> {
        let mut layers: Vec<&Conv2d> = self.encoder.iter().collect();
        for t in &self.transitions {
            layers.push(&t.conv1);
            layers.push(&t.conv2);
        }
        layers.extend(&self.decoder);
        layers.push(&self.head);
        layers.extend(self.fusion.iter().flatten());
        layers
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

    /// Runs the encoder on `[N, C_in, R, R]` inputs.
    pub fn encode<'g, E: Element>(&self, p: &Bound<'g, E>, x: Var<'g, E>) -> Result<Encoded<'g, E>> {
        let shape = x.shape();
        let (cin, r) = (self.config.input_channels, self.config.resolution);
        if shape.len() != 4 || shape[1] != cin || shape[2] != r || shape[3] != r {
            return Err(Error::shape(
                "generator encode",
                format!("expected [N, {cin}, {r}, {r}], got {shape:?}"),
            ));
        }
        let mut levels = Vec::with_capacity(self.encoder.len());
        let mut h = x;
        for (i, conv) in self.encoder.iter().enumerate() {
            h = conv.forward(p, h)?;
            if i > 0 {
                h = h.instance_norm(NORM_EPS)?;
            }
            h = h.leaky_relu(LEAKY_SLOPE);
            levels.push(h);
        }
        Ok(Encoded { levels })
    }

    /// Dense fusion at hooked layer `layer` with this generator's projections.
    pub fn fuse<'g, E: Element>(
        &self,
        p: &Bound<'g, E>,
        layer: usize,
        x: Var<'g, E>,
        enc: &Encoded<'g, E>,
    ) -> Result<Var<'g, E>> {
        let projections = self.fusion[layer]
            .iter()
            .map(|c| Ok((p.get(&c.weight_name())?, Some(p.get(&c.bias_name())?))))
            .collect::<Result<Vec<_>>>()?;
        dense_fuse(x, enc.fused(), &projections)
    }

    /// Full forward pass. `gates`, when given, holds one `[N, C_l]` weight per
    /// hooked layer and is applied only when the condenser is enabled.
    pub fn forward<'g, E: Element>(
        &self,
        p: &Bound<'g, E>,
        x: Var<'g, E>,
        gates: Option<&[Var<'g, E>]>,
    ) -> Result<Var<'g, E>> {
        let enc = self.encode(p, x)?;
        let hooked = self.hooked_channels();
        let n = x.shape()[0];
        if let Some(gates) = gates {
            if gates.len() != hooked.len() {
                return Err(Error::shape(
                    "generator gates",
                    format!("{} gate vectors for {} hooked layers", gates.len(), hooked.len()),
                ));
            }
            for (l, (g, &c)) in gates.iter().zip(&hooked).enumerate() {
                if g.shape() != [n, c] {
                    return Err(Error::shape(
                        "generator gates",
                        format!("layer {l} has {c} channels but its gate is {:?}", g.shape()),
                    ));
                }
            }
        }
        let gates = if self.config.condenser { gates } else { None };
        let hook = |l: usize, h: Var<'g, E>| -> Result<Var<'g, E>> {
            let mut h = h;
            if self.config.dense_fusion {
                h = self.fuse(p, l, h, &enc)?;
            }
            if let Some(gates) = gates {
                h = h.channel_scale(gates[l])?;
            }
            Ok(h)
        };
        let mut h = enc.bottleneck();
        let mut l = 0;
        for t in &self.transitions {
            let r = t.conv1.forward(p, h)?.instance_norm(NORM_EPS)?.relu();
            let r = t.conv2.forward(p, r)?.instance_norm(NORM_EPS)?;
            h = hook(l, h.add(r)?)?;
            l += 1;
        }
        for d in &self.decoder {
            h = d.forward(p, h.upsample_nearest(2)?)?.instance_norm(NORM_EPS)?.relu();
            h = hook(l, h)?;
            l += 1;
        }
        Ok(self.head.forward(p, h.upsample_nearest(2)?)?.sigmoid())
    }
}

/// `x + Σ_i Pool(H_i(e_i))` where each `H_i` is a 1x1 convolution (`[C_x, C_i, 1, 1]`
/// weight, optional bias) and `Pool` aligns `e_i` to the spatial size of `x`.
/// Pooling happens before the projection; both are linear and the pooling
/// weights sum to one, so the order does not change the result.
pub fn dense_fuse<'g, E: Element>(
    x: Var<'g, E>,
    features: &[Var<'g, E>],
    projections: &[(Var<'g, E>, Option<Var<'g, E>>)],
) -> Result<Var<'g, E>> {
    let (_, c, h, w) = x.value().dims4()?;
    if features.len() != projections.len() {
        return Err(Error::shape(
            "dense_fuse",
            format!("{} feature maps but {} projections", features.len(), projections.len()),
        ));
    }
    let mut out = x;
    for (i, (e, (weight, bias))) in features.iter().zip(projections).enumerate() {
        let ws = weight.shape();
        let ci = e.shape()[1];
        if ws != [c, ci, 1, 1] {
            return Err(Error::shape(
                "dense_fuse",
                format!("projection {} is {ws:?}, expected [{c}, {ci}, 1, 1]", i + 1),
            ));
        }
        let aligned = e.resize_to(h, w)?;
        out = out.add(aligned.conv2d(*weight, *bias, 1, 0)?)?;
    }
    Ok(out)
}

/// One frame from a conditioning window, with optional per-layer gating.
pub fn generate_frame(
    generator: &Generator,
    params: &ParamStore<f32>,
    window: &ConditioningWindow,
    gating: Option<&[Vec<f32>]>,
) -> Result<Image> {
    let g = Graph::<f32>::new();
    let p = params.bind(&g, NAMESPACE, false);
    let x = window.to_tensor::<f32>();
    let shape = [1, x.shape()[0], x.shape()[1], x.shape()[2]];
    let x = g.constant(x.reshape(&shape)?);
    let gates = gating
        .map(|ws| {
            ws.iter()
                .map(|w| Ok(g.constant(Tensor::new(&[1, w.len()], w.clone())?)))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let y = generator.forward(&p, x, gates.as_deref())?;
    Image::from_tensor(&y.value())
}
