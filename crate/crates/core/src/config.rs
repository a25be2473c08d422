//! Training configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{PRIOR_FRAMES_CHANNELS, WINDOW_LEN};
use crate::disc::{Discriminator, DiscriminatorConfig};
use crate::error::{Error, Result};
use crate::generator::{Generator, GeneratorConfig};
use crate::losses::LossWeights;
use crate::nn::AdamConfig;
use crate::prob::kernel::{GaussianKernel, DEFAULT_KERNEL_SIGMA, DEFAULT_KERNEL_SIZE};
use crate::prob::{Predictor, PredictorConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub iterations: u64,
    /// Sequences per step; each contributes `discriminator.sequence_length` frames.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Side length frames are cropped to before training.
    pub crop_size: usize,
    pub checkpoint_interval: u64,
    pub log_interval: u64,
    /// Accepted for compatibility; training is single-threaded and always reproducible.
    pub deterministic: bool,
    /// Feed the three ground-truth frames before each target as extra input channels.
    pub teacher_forcing: bool,
    pub output_dir: PathBuf,
    pub data: DataConfig,
    pub loss: LossConfig,
    pub modules: ModuleFlags,
    pub generator: GeneratorWidths,
    pub discriminator: DiscriminatorConfig,
    pub predictor: PredictorWidths,
    pub condenser: CondenserConfig,
    pub perceptual: PerceptualConfig,
    pub kernel: KernelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            iterations: 2000,
            batch_size: 4,
            learning_rate: 1e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            crop_size: 64,
            checkpoint_interval: 500,
            log_interval: 10,
            deterministic: true,
            teacher_forcing: false,
            output_dir: PathBuf::from("runs/cpnet"),
            data: DataConfig::default(),
            loss: LossConfig::default(),
            modules: ModuleFlags::default(),
            generator: GeneratorWidths::default(),
            discriminator: DiscriminatorConfig::default(),
            predictor: PredictorWidths::default(),
            condenser: CondenserConfig::default(),
            perceptual: PerceptualConfig::default(),
            kernel: KernelConfig::default(),
        }
    }
}

/// Where clips come from: a directory of `clip_####` folders, or the toy generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dir: Option<PathBuf>,
    pub train_fraction: f64,
    pub toy: ToyConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: None,
            train_fraction: 0.9,
            toy: ToyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub seed: u64,
    pub clips: usize,
    pub frames: usize,
    pub resolution: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            seed: 0,
            clips: 10,
            frames: 30,
            resolution: 64,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    #[serde(flatten)]
    pub weights: LossWeights,
    /// Compare predicted maps of generated frames with the analytic Gaussian
    /// map instead of the prediction on the real frame.
    pub use_analytic_target_in_eq7: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModuleFlags {
    pub dense_fusion: bool,
    pub condenser: bool,
    pub prob_map: bool,
}

impl Default for ModuleFlags {
    fn default() -> Self {
        ModuleFlags {
            dense_fusion: true,
            condenser: true,
            prob_map: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorWidths {
    pub base_width: usize,
    pub encoder_levels: usize,
    pub transition_blocks: usize,
}

impl Default for GeneratorWidths {
    fn default() -> Self {
        GeneratorWidths {
            base_width: 32,
            encoder_levels: 4,
            transition_blocks: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorWidths {
    pub base_width: usize,
}

impl Default for PredictorWidths {
    fn default() -> Self {
        PredictorWidths { base_width: 16 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Stub,
    ClipVit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CondenserConfig {
    pub provider: ProviderKind,
    /// Directory holding `config.json` and `model.safetensors` (CLIP backend).
    pub weights: Option<PathBuf>,
    /// Embedding size of the stub provider.
    pub dim: usize,
    pub seed: u64,
}

impl Default for CondenserConfig {
    fn default() -> Self {
        CondenserConfig {
            provider: ProviderKind::Stub,
            weights: None,
            dim: 512,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerceptualBackend {
    Stub,
    Identity,
    Vgg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptualConfig {
    pub backend: PerceptualBackend,
    /// A safetensors file with `features.{i}.weight` / `.bias` (VGG backend).
    pub weights: Option<PathBuf>,
    pub seed: u64,
}

impl Default for PerceptualConfig {
    fn default() -> Self {
        PerceptualConfig {
            backend: PerceptualBackend::Stub,
            weights: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    pub size: usize,
    pub sigma: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            size: DEFAULT_KERNEL_SIZE,
            sigma: DEFAULT_KERNEL_SIGMA,
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: TrainConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            input_channels: WINDOW_LEN + if self.teacher_forcing { PRIOR_FRAMES_CHANNELS } else { 0 },
            base_width: self.generator.base_width,
            encoder_levels: self.generator.encoder_levels,
            transition_blocks: self.generator.transition_blocks,
            resolution: self.crop_size,
            dense_fusion: self.modules.dense_fusion,
            condenser: self.modules.condenser,
        }
    }

    pub fn predictor_config(&self) -> PredictorConfig {
        PredictorConfig {
            base_width: self.predictor.base_width,
            resolution: self.crop_size,
        }
    }

    /// Loss weights with the terms of disabled modules zeroed.
    pub fn effective_weights(&self) -> LossWeights {
        let mut w = self.loss.weights;
        if !self.modules.prob_map {
            w.lambda_p = 0.0;
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} must lie in [0, 1), got {b}"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if self.checkpoint_interval == 0 || self.log_interval == 0 {
            return bad("checkpoint_interval and log_interval must be at least 1".into());
        }
        if !(self.data.train_fraction > 0.0 && self.data.train_fraction <= 1.0) {
            return bad(format!("data.train_fraction must lie in (0, 1], got {}", self.data.train_fraction));
        }
        if self.kernel.size > self.crop_size {
            return bad(format!(
                "kernel.size {} exceeds crop_size {}",
                self.kernel.size, self.crop_size
            ));
        }
        if self.condenser.provider == ProviderKind::ClipVit && self.condenser.weights.is_none() {
            return bad("condenser.provider = \"clip_vit\" needs condenser.weights".into());
        }
        if self.perceptual.backend == PerceptualBackend::Vgg && self.perceptual.weights.is_none() {
            return bad("perceptual.backend = \"vgg\" needs perceptual.weights".into());
        }
        self.loss.weights.validate().map_err(|e| Error::Config(e.to_string()))?;
        // Architecture errors surface here rather than mid-run.
        let config_error = |e: Error| match e {
            Error::Config(msg) => Error::Config(msg),
            other => Error::Config(other.to_string()),
        };
        Generator::new(self.generator_config()).map_err(config_error)?;
        Predictor::new(self.predictor_config()).map_err(config_error)?;
        Discriminator::sequence(self.discriminator.clone()).map_err(config_error)?;
        GaussianKernel::new(self.kernel.size, self.kernel.sigma).map_err(config_error)?;
        Ok(())
    }
}
