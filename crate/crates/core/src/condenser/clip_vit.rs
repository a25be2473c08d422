//! Inference-only CLIP vision transformer, loaded from a Hugging Face style
//! `model.safetensors` plus `config.json`.
//!
//! Both `CLIPModel` and `CLIPVisionModelWithProjection` checkpoints work; only
//! the vision tower and the visual projection are read. Calls to
//! [`EmbeddingProvider::embed`] share nothing mutable and may run concurrently.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::EmbeddingProvider;
use crate::data::Image;
use crate::error::{Error, Result};
use crate::nn::tensor::matmul;
use crate::nn::{Graph, Tensor};
use crate::weights::{load_safetensors, take};

const BACKEND: &str = "clip_vit";

pub const CLIP_MEAN: [f32; 3] = [0.481_454_66, 0.457_827_5, 0.408_210_73];
pub const CLIP_STD: [f32; 3] = [0.268_629_54, 0.261_302_58, 0.275_777_11];

#[derive(Clone, Debug, Deserialize)]
pub struct VisionConfig {
    pub hidden_size: usize,
    pub intermediate_size: usize,
    pub num_attention_heads: usize,
    pub num_hidden_layers: usize,
    pub image_size: usize,
    pub patch_size: usize,
    #[serde(default = "default_ln_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_act")]
    pub hidden_act: String,
    #[serde(default)]
    pub projection_dim: Option<usize>,
}

fn default_ln_eps() -> f64 {
    1e-5
}

fn default_act() -> String {
    "quick_gelu".into()
}

#[derive(Deserialize)]
struct FullConfig {
    vision_config: VisionConfig,
    projection_dim: Option<usize>,
}

struct Linear {
    weight: Tensor<f32>,
    bias: Option<Tensor<f32>>,
}

impl Linear {
    fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    /// `[T, in] -> [T, out]`.
    fn apply(&self, x: &[f32], tokens: usize) -> Vec<f32> {
        let (out, inp) = (self.weight.shape()[0], self.weight.shape()[1]);
        let mut y = vec![0.0; tokens * out];
        if let Some(b) = &self.bias {
            for row in y.chunks_mut(out) {
                row.copy_from_slice(b.data());
            }
        }
        matmul(x, false, self.weight.data(), true, &mut y, tokens, inp, out, true);
        y
    }
}

struct LayerNorm {
    weight: Tensor<f32>,
    bias: Tensor<f32>,
    eps: f32,
}

impl LayerNorm {
    fn apply(&self, x: &[f32]) -> Vec<f32> {
        let d = self.weight.numel();
        let mut y = x.to_vec();
        for row in y.chunks_mut(d) {
            let mean = row.iter().sum::<f32>() / d as f32;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / d as f32;
            let inv = 1.0 / (var + self.eps).sqrt();
            for ((v, g), b) in row.iter_mut().zip(self.weight.data()).zip(self.bias.data()) {
                *v = (*v - mean) * inv * g + b;
            }
        }
        y
    }
}

struct EncoderLayer {
    ln1: LayerNorm,
    q: Linear,
    k: Linear,
    v: Linear,
    out: Linear,
    ln2: LayerNorm,
    fc1: Linear,
    fc2: Linear,
}

fn linear(
    w: &mut BTreeMap<String, Tensor<f32>>,
    prefix: &str,
    out: usize,
    inp: usize,
    bias: bool,
    path: &Path,
) -> Result<Linear> {
    Ok(Linear {
        weight: take(w, &format!("{prefix}.weight"), Some(&[out, inp]), BACKEND, path)?,
        bias: if bias {
            Some(take(w, &format!("{prefix}.bias"), Some(&[out]), BACKEND, path)?)
        } else {
            None
        },
    })
}

fn layer_norm(w: &mut BTreeMap<String, Tensor<f32>>, prefix: &str, d: usize, eps: f32, path: &Path) -> Result<LayerNorm> {
    Ok(LayerNorm {
        weight: take(w, &format!("{prefix}.weight"), Some(&[d]), BACKEND, path)?,
        bias: take(w, &format!("{prefix}.bias"), Some(&[d]), BACKEND, path)?,
        eps,
    })
}

/// A pretrained CLIP image encoder used as a frozen [`EmbeddingProvider`].
pub struct ClipVisionProvider {
    config: VisionConfig,
    path: PathBuf,
    class_embedding: Tensor<f32>,
    patch_embedding: Tensor<f32>,
    position_embedding: Tensor<f32>,
    pre_ln: LayerNorm,
    layers: Vec<EncoderLayer>,
    post_ln: LayerNorm,
    projection: Linear,
}

impl std::fmt::Debug for ClipVisionProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClipVisionProvider")
            .field("path", &self.path)
            .field("config", &self.config)
            .finish()
    }
}

impl ClipVisionProvider {
    /// Loads `dir/config.json` and `dir/model.safetensors`.
    pub fn load(dir: &Path) -> Result<Self> {
        let fail = |path: &Path, reason: String| Error::BackendLoad {
            backend: BACKEND,
            path: path.to_path_buf(),
            reason,
        };
        let config_path = dir.join("config.json");
        let text = std::fs::read_to_string(&config_path).map_err(|e| fail(&config_path, e.to_string()))?;
        let config = match serde_json::from_str::<FullConfig>(&text) {
            Ok(full) => VisionConfig {
                projection_dim: full.projection_dim.or(full.vision_config.projection_dim),
                ..full.vision_config
            },
            Err(_) => serde_json::from_str::<VisionConfig>(&text)
                .map_err(|e| fail(&config_path, e.to_string()))?,
        };
        if config.hidden_act != "quick_gelu" {
            return Err(fail(
                &config_path,
                format!("unsupported activation `{}` (only quick_gelu)", config.hidden_act),
            ));
        }
        if config.hidden_size % config.num_attention_heads != 0 || config.image_size % config.patch_size != 0 {
            return Err(fail(&config_path, "inconsistent transformer dimensions".into()));
        }
        let weights_path = dir.join("model.safetensors");
        let mut w = load_safetensors(&weights_path, BACKEND)?;
        Self::from_tensors(config, &mut w, &weights_path)
    }

    fn from_tensors(config: VisionConfig, w: &mut BTreeMap<String, Tensor<f32>>, path: &Path) -> Result<Self> {
        let d = config.hidden_size;
        let p = config.patch_size;
        let f = config.intermediate_size;
        let tokens = (config.image_size / p).pow(2) + 1;
        let eps = config.layer_norm_eps as f32;
        let mut layers = Vec::new();
        for i in 0..config.num_hidden_layers {
            let base = format!("vision_model.encoder.layers.{i}");
            layers.push(EncoderLayer {
                ln1: layer_norm(w, &format!("{base}.layer_norm1"), d, eps, path)?,
                q: linear(w, &format!("{base}.self_attn.q_proj"), d, d, true, path)?,
                k: linear(w, &format!("{base}.self_attn.k_proj"), d, d, true, path)?,
                v: linear(w, &format!("{base}.self_attn.v_proj"), d, d, true, path)?,
                out: linear(w, &format!("{base}.self_attn.out_proj"), d, d, true, path)?,
                ln2: layer_norm(w, &format!("{base}.layer_norm2"), d, eps, path)?,
                fc1: linear(w, &format!("{base}.mlp.fc1"), f, d, true, path)?,
                fc2: linear(w, &format!("{base}.mlp.fc2"), d, f, true, path)?,
            });
        }
        let proj_dim = config.projection_dim.unwrap_or(512);
        Ok(ClipVisionProvider {
            class_embedding: take(w, "vision_model.embeddings.class_embedding", Some(&[d]), BACKEND, path)?,
            patch_embedding: take(
                w,
                "vision_model.embeddings.patch_embedding.weight",
                Some(&[d, 3, p, p]),
                BACKEND,
                path,
            )?,
            position_embedding: take(
                w,
                "vision_model.embeddings.position_embedding.weight",
                Some(&[tokens, d]),
                BACKEND,
                path,
            )?,
            pre_ln: layer_norm(w, "vision_model.pre_layrnorm", d, eps, path)?,
            post_ln: layer_norm(w, "vision_model.post_layernorm", d, eps, path)?,
            projection: linear(w, "visual_projection", proj_dim, d, false, path)?,
            layers,
            config,
            path: path.to_path_buf(),
        })
    }

    pub fn config(&self) -> &VisionConfig {
        &self.config
    }

    /// Resizes to the model's input size, replicates gray images to RGB and
    /// applies CLIP's channel normalization. Returns `[3, S, S]`.
    pub fn preprocess(&self, image: &Image) -> Result<Vec<f32>> {
        let (c, h, w) = (image.channels(), image.height(), image.width());
        if c != 1 && c != 3 {
            return Err(Error::shape("clip preprocess", format!("expected 1 or 3 channels, got {c}")));
        }
        let s = self.config.image_size;
        let g = Graph::<f32>::new();
        let x = g.constant(image.to_tensor::<f32>().reshape(&[1, c, h, w])?);
        let resized = x.resize_to(s, s)?.value();
        let plane = s * s;
        let mut out = vec![0.0; 3 * plane];
        for ch in 0..3 {
            let src = if c == 1 { 0 } else { ch };
            for (o, &v) in out[ch * plane..(ch + 1) * plane]
                .iter_mut()
                .zip(&resized.data()[src * plane..(src + 1) * plane])
            {
                *o = (v - CLIP_MEAN[ch]) / CLIP_STD[ch];
            }
        }
        Ok(out)
    }

    /// Projected image embedding of already preprocessed `[3, S, S]` pixels.
    pub fn embed_pixels(&self, pixels: &[f32]) -> Result<Vec<f32>> {
        let cfg = &self.config;
        let (s, p, d) = (cfg.image_size, cfg.patch_size, cfg.hidden_size);
        if pixels.len() != 3 * s * s {
            return Err(Error::shape("clip embed", format!("expected 3x{s}x{s} pixels")));
        }
        let g = Graph::<f32>::new();
        let x = g.constant(Tensor::new(&[1, 3, s, s], pixels.to_vec())?);
        let patches = x.conv2d(g.constant(self.patch_embedding.clone()), None, p, 0)?.value();
        let n = (s / p) * (s / p);
        let tokens = n + 1;
        let mut h = vec![0.0f32; tokens * d];
        h[..d].copy_from_slice(self.class_embedding.data());
        for t in 0..n {
            for c in 0..d {
                h[(t + 1) * d + c] = patches.data()[c * n + t];
            }
        }
        for (v, &pe) in h.iter_mut().zip(self.position_embedding.data()) {
            *v += pe;
        }
        let mut h = self.pre_ln.apply(&h);
        let heads = cfg.num_attention_heads;
        let hd = d / heads;
        let scale = 1.0 / (hd as f32).sqrt();
        for layer in &self.layers {
            let x = layer.ln1.apply(&h);
            let (q, k, v) = (layer.q.apply(&x, tokens), layer.k.apply(&x, tokens), layer.v.apply(&x, tokens));
            let mut ctx = vec![0.0f32; tokens * d];
            let gather = |src: &[f32], head: usize| -> Vec<f32> {
                src.chunks(d).flat_map(|row| row[head * hd..(head + 1) * hd].to_vec()).collect()
            };
            for head in 0..heads {
                let (qh, kh, vh) = (gather(&q, head), gather(&k, head), gather(&v, head));
                let mut scores = vec![0.0f32; tokens * tokens];
                matmul(&qh, false, &kh, true, &mut scores, tokens, hd, tokens, false);
                for row in scores.chunks_mut(tokens) {
                    let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max) * scale;
                    let mut total = 0.0;
                    for s in row.iter_mut() {
                        *s = (*s * scale - max).exp();
                        total += *s;
                    }
                    row.iter_mut().for_each(|s| *s /= total);
                }
                let mut oh = vec![0.0f32; tokens * hd];
                matmul(&scores, false, &vh, false, &mut oh, tokens, tokens, hd, false);
                for (t, row) in oh.chunks(hd).enumerate() {
                    ctx[t * d + head * hd..t * d + (head + 1) * hd].copy_from_slice(row);
                }
            }
            let attn = layer.out.apply(&ctx, tokens);
            h.iter_mut().zip(&attn).for_each(|(a, b)| *a += b);
            let x = layer.ln2.apply(&h);
            let mut mid = layer.fc1.apply(&x, tokens);
            mid.iter_mut().for_each(|v| *v *= 1.0 / (1.0 + (-1.702 * *v).exp()));
            let mlp = layer.fc2.apply(&mid, tokens);
            h.iter_mut().zip(&mlp).for_each(|(a, b)| *a += b);
        }
        let pooled = self.post_ln.apply(&h[..d]);
        Ok(self.projection.apply(&pooled, 1))
    }
}

impl EmbeddingProvider for ClipVisionProvider {
    fn dim(&self) -> usize {
        self.projection.out_features()
    }

    fn embed(&self, image: &Image) -> Result<Vec<f32>> {
        self.embed_pixels(&self.preprocess(image)?)
    }
}
