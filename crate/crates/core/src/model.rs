//! All networks and frozen helpers of one configuration, built together.

use std::sync::Arc;

use crate::condenser::{ClipVisionProvider, CondenserHead, EmbeddingProvider, StubProvider};
use crate::config::{PerceptualBackend, ProviderKind, TrainConfig};
use crate::disc::Discriminator;
use crate::error::{Error, Result};
use crate::generator::Generator;
use crate::losses::{Extractor, VggExtractor};
use crate::nn::ParamStore;
use crate::prob::{GaussianKernel, Predictor};

pub struct Cpnet {
    pub config: TrainConfig,
    pub generator: Generator,
    pub head: CondenserHead,
    pub frame_disc: Discriminator,
    pub seq_disc: Discriminator,
    pub predictor: Predictor,
    pub provider: Arc<dyn EmbeddingProvider>,
    pub extractor: Extractor,
    pub kernel: GaussianKernel,
}

impl std::fmt::Debug for Cpnet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cpnet")
            .field("generator", &self.generator.config)
            .field("embedding_dim", &self.head.dim)
            .finish_non_exhaustive()
    }
}

/// The embedding provider a configuration asks for.
pub fn build_provider(config: &TrainConfig) -> Result<Arc<dyn EmbeddingProvider>> {
    let c = &config.condenser;
    Ok(match c.provider {
        ProviderKind::Stub => Arc::new(StubProvider::new(c.dim, c.seed)?),
        ProviderKind::ClipVit => {
            let dir = c
                .weights
                .as_ref()
                .ok_or_else(|| Error::Config("condenser.weights is required for clip_vit".into()))?;
            Arc::new(ClipVisionProvider::load(dir)?)
        }
    })
}

pub fn build_extractor(config: &TrainConfig) -> Result<Extractor> {
    let c = &config.perceptual;
    Ok(match c.backend {
        PerceptualBackend::Stub => Extractor::Stub { seed: c.seed },
        PerceptualBackend::Identity => Extractor::Identity,
        PerceptualBackend::Vgg => {
            let path = c
                .weights
                .as_ref()
                .ok_or_else(|| Error::Config("perceptual.weights is required for vgg".into()))?;
            Extractor::Vgg(VggExtractor::load(path)?)
        }
    })
}

impl Cpnet {
    pub fn from_config(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        let generator = Generator::new(config.generator_config())?;
        let provider = build_provider(config)?;
        let head = CondenserHead::new(provider.dim(), generator.hooked_channels());
        Ok(Cpnet {
            generator,
            head,
            frame_disc: Discriminator::frame(config.discriminator.clone())?,
            seq_disc: Discriminator::sequence(config.discriminator.clone())?,
            predictor: Predictor::new(config.predictor_config())?,
            provider,
            extractor: build_extractor(config)?,
            kernel: GaussianKernel::new(config.kernel.size, config.kernel.sigma)
                .map_err(|e| Error::Config(e.to_string()))?,
            config: config.clone(),
        })
    }

    pub fn resolution(&self) -> usize {
        self.config.crop_size
    }

    /// Fresh parameters for every trainable network.
    pub fn init_params(&self) -> ParamStore<f32> {
        let seed = self.config.seed;
        let mut store = self.generator.init(seed);
        for part in [
            self.head.init(seed),
            self.frame_disc.init(seed),
            self.seq_disc.init(seed),
            self.predictor.init(seed),
        ] {
            for (k, v) in part.iter() {
                store.insert(k.clone(), v.clone());
            }
        }
        store
    }
}
