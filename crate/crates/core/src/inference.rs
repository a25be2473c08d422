//! Video generation from a landmark track with trained parameters.

use std::path::Path;

use crate::checkpoint::Checkpoint;
use crate::condenser::{embed_batch, NAMESPACE as CONDENSER};
use crate::data::{ConditioningWindow, FrameClip, Image, LandmarkSet, PRIOR_FRAMES, WINDOW_LEN, WINDOW_RADIUS};
use crate::error::{Error, Result};
use crate::generator::NAMESPACE as GENERATOR;
use crate::metrics::FrameGenerator;
use crate::model::Cpnet;
use crate::nn::{Graph, ParamStore, Tensor};

/// Windows pushed through the generator at once when frames do not depend on each other.
const CHUNK: usize = 8;

/// A network assembly together with the parameters it runs with.
pub struct TrainedModel {
    pub net: Cpnet,
    pub params: ParamStore<f32>,
}

impl TrainedModel {
    pub fn new(net: Cpnet, params: ParamStore<f32>) -> Self {
        TrainedModel { net, params }
    }

    pub fn from_checkpoint(checkpoint: &Checkpoint) -> Result<Self> {
        Ok(TrainedModel {
            net: Cpnet::from_config(&checkpoint.config)?,
            params: checkpoint.params.clone(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Whether the generator expects prior RGB frames next to the landmark images.
    pub fn uses_prior_frames(&self) -> bool {
        self.net.generator.config.input_channels > WINDOW_LEN
    }

    /// Generates one frame per window in a single batched pass.
    pub fn generate_windows(&self, windows: &[ConditioningWindow]) -> Result<Vec<Image>> {
        let mut frames = Vec::with_capacity(windows.len());
        for chunk in windows.chunks(CHUNK) {
            let g = Graph::<f32>::new();
            let gp = self.params.bind(&g, GENERATOR, false);
            let inputs: Vec<_> = chunk.iter().map(|w| w.to_tensor::<f32>()).collect();
            let x = g.constant(Tensor::stack(&inputs)?);
            let gates = if self.net.config.modules.condenser {
                let cp = self.params.bind(&g, CONDENSER, false);
                let images: Vec<_> = chunk.iter().map(|w| w.current_landmarks()).collect();
                let v = embed_batch(self.net.provider.as_ref(), &images)?;
                Some(self.net.head.gates(&cp, g.constant(v))?)
            } else {
                None
            };
            let y = self.net.generator.forward(&gp, x, gates.as_deref())?.value();
            for i in 0..chunk.len() {
                frames.push(Image::from_tensor(&y.select(i)?)?);
            }
        }
        Ok(frames)
    }

    /// Generates frames for window centers `3 .. len − 3` of a landmark track.
    /// A generator trained with prior frames needs the first three ground-truth
    /// frames in `bootstrap`; later windows are fed its own outputs.
    pub fn generate_video(&self, name: &str, track: &[LandmarkSet], bootstrap: Option<&[Image]>, frame_rate: f64) -> Result<FrameClip> {
        if track.len() < WINDOW_LEN {
            return Err(Error::invalid(format!(
                "a landmark track of {} frames is shorter than the {WINDOW_LEN}-frame window",
                track.len()
            )));
        }
        let r = self.net.resolution();
        let centers = WINDOW_RADIUS..track.len() - WINDOW_RADIUS;
        let frames = if self.uses_prior_frames() {
            let boot = bootstrap
                .filter(|b| b.len() >= PRIOR_FRAMES)
                .ok_or_else(|| Error::invalid(format!("this model needs {PRIOR_FRAMES} bootstrap frames")))?;
            let mut history: Vec<Image> = boot[..PRIOR_FRAMES].to_vec();
            let mut out = Vec::with_capacity(centers.len());
            for t in centers.clone() {
                let prior = history[history.len() - PRIOR_FRAMES..].to_vec();
                let window = ConditioningWindow::from_track(track, t, r, r, Some(prior))?;
                let frame = self.generate_windows(std::slice::from_ref(&window))?.remove(0);
                history.push(frame.clone());
                out.push(frame);
            }
            out
        } else {
            let windows = centers
                .clone()
                .map(|t| ConditioningWindow::from_track(track, t, r, r, None))
                .collect::<Result<Vec<_>>>()?;
            self.generate_windows(&windows)?
        };
        FrameClip::generated(name, frames, track[centers].to_vec(), frame_rate)
    }
}

impl FrameGenerator for TrainedModel {
    fn generate_clip(&self, clip: &FrameClip) -> Result<Vec<Image>> {
        let bootstrap = &clip.frames()[..PRIOR_FRAMES.min(clip.len())];
        let video = self.generate_video(&clip.name, clip.landmarks(), Some(bootstrap), clip.frame_rate)?;
        Ok(video.frames().to_vec())
    }
}
