//! Alternating optimization of the discriminators, the map predictor and the
//! generator, plus the run loop with logging, checkpoints and resumption.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::{checkpoint_name, Checkpoint};
use crate::condenser::embed_batch;
use crate::config::TrainConfig;
use crate::data::{build_window, crop_clip, make_toy_dataset, read_dataset, split_clips, FrameClip, WINDOW_RADIUS};
use crate::disc::{FRAME_NAMESPACE, SEQUENCE_NAMESPACE};
use crate::error::{Error, Result};
use crate::generator::NAMESPACE as GENERATOR;
use crate::condenser::NAMESPACE as CONDENSER;
use crate::losses::{
    lsgan_discriminator_loss, lsgan_generator_loss, perceptual_loss, probability_consistency_loss,
    temporal_loss_d, temporal_loss_g, weighted_total,
};
use crate::model::Cpnet;
use crate::nn::{Adam, Bound, Gradients, Graph, ParamStore, Tensor, Var};
use crate::prob::predictor::NAMESPACE as PREDICTOR;
use crate::prob::{make_probability_map, predictor_objective};

pub const LOG_FILE: &str = "train_log.csv";
pub const LOG_COLUMNS: [&str; 9] = ["iteration", "l_adv", "l_r", "l_t", "l_p", "l_dmp", "total", "d_adv", "d_t"];

/// Per-term values of one step. Terms that were not evaluated are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossRow {
    pub iteration: u64,
    pub l_adv: Option<f64>,
    pub l_r: Option<f64>,
    pub l_t: Option<f64>,
    pub l_p: Option<f64>,
    pub l_dmp: Option<f64>,
    pub total: f64,
    pub d_adv: f64,
    pub d_t: Option<f64>,
}

impl LossRow {
    fn cells(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        vec![
            self.iteration.to_string(),
            opt(self.l_adv),
            opt(self.l_r),
            opt(self.l_t),
            opt(self.l_p),
            opt(self.l_dmp),
            self.total.to_string(),
            self.d_adv.to_string(),
            opt(self.d_t),
        ]
    }

    fn parse(record: &csv::StringRecord) -> Result<Self> {
        let bad = || Error::invalid(format!("malformed training log row {record:?}"));
        let opt = |i: usize| -> Result<Option<f64>> {
            match record.get(i) {
                Some("") => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| bad()),
                None => Err(bad()),
            }
        };
        Ok(LossRow {
            iteration: record.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?,
            l_adv: opt(1)?,
            l_r: opt(2)?,
            l_t: opt(3)?,
            l_p: opt(4)?,
            l_dmp: opt(5)?,
            total: opt(6)?.ok_or_else(bad)?,
            d_adv: opt(7)?.ok_or_else(bad)?,
            d_t: opt(8)?,
        })
    }
}

pub fn write_log(path: &Path, rows: &[LossRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(LOG_COLUMNS)?;
    for row in rows {
        w.write_record(row.cells())?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_log(path: &Path) -> Result<Vec<LossRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records().map(|rec| LossRow::parse(&rec?)).collect()
}

/// Training inputs for `sequences` runs of consecutive frames, flattened to
/// `M = sequences · T` rows in sequence-major order.
#[derive(Clone, Debug)]
pub struct Batch {
    pub sequences: usize,
    /// `[M, C_in, R, R]` generator inputs.
    pub inputs: Tensor<f32>,
    /// `[M, 7, R, R]` landmark channels (the discriminators' condition).
    pub landmarks: Tensor<f32>,
    /// `[M, 3, R, R]` ground-truth frames.
    pub targets: Tensor<f32>,
    /// `[M, 1, R, R]` analytic density maps of the targets' landmarks.
    pub target_maps: Tensor<f32>,
    /// `[M, d]` embeddings of the targets' landmark images.
    pub embeddings: Tensor<f32>,
    /// `(clip, frame)` of every row.
    pub frames: Vec<(usize, usize)>,
}

/// Loads or synthesizes the corpus, crops it and splits it by clip.
pub fn prepare_clips(config: &TrainConfig) -> Result<(Vec<FrameClip>, Vec<FrameClip>)> {
    let clips = match &config.data.dir {
        Some(dir) => read_dataset(dir)?,
        None => {
            let t = &config.data.toy;
            make_toy_dataset(t.seed, t.clips, t.frames, t.resolution)?
        }
    };
    let cropped = clips
        .iter()
        .map(|c| crop_clip(c, config.crop_size))
        .collect::<Result<Vec<_>>>()?;
    Ok(split_clips(&cropped, config.data.train_fraction))
}

fn grads_of(bound: &Bound<'_, f32>, grads: &mut Gradients<f32>) -> BTreeMap<String, Tensor<f32>> {
    bound
        .iter()
        .filter_map(|(k, v)| grads.take(*v).map(|g| (k.clone(), g)))
        .collect()
}

fn finite(term: &'static str, iteration: u64, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { term, iteration })
    }
}

/// Parameters, optimizer state and data of a run in progress.
pub struct Trainer {
    pub model: Cpnet,
    pub params: ParamStore<f32>,
    pub adam: Adam,
    pub iteration: u64,
    clips: Vec<FrameClip>,
    embeddings: HashMap<(usize, usize), Vec<f32>>,
    maps: HashMap<(usize, usize), Tensor<f32>>,
}

impl Trainer {
    pub fn new(config: &TrainConfig, clips: Vec<FrameClip>) -> Result<Self> {
        let model = Cpnet::from_config(config)?;
        let params = model.init_params();
        Self::with_state(model, params, Adam::new(config.adam()), 0, clips)
    }

    /// Continues from a checkpoint. The architecture comes from `config`, and
    /// the checkpoint's parameters must fit it.
    pub fn resume(config: &TrainConfig, checkpoint: Checkpoint, clips: Vec<FrameClip>) -> Result<Self> {
        checkpoint.check_namespaces()?;
        let model = Cpnet::from_config(config)?;
        let fresh = model.init_params();
        for (k, v) in fresh.iter() {
            let got = checkpoint.params.get(k).map_err(|_| Error::Checkpoint {
                path: PathBuf::new(),
                reason: format!("parameter `{k}` is missing; was the checkpoint made with another architecture?"),
            })?;
            if got.shape() != v.shape() {
                return Err(Error::Checkpoint {
                    path: PathBuf::new(),
                    reason: format!("parameter `{k}` is {:?}, the config needs {:?}", got.shape(), v.shape()),
                });
            }
        }
        let mut adam = checkpoint.adam;
        adam.config = config.adam();
        Self::with_state(model, checkpoint.params, adam, checkpoint.iteration, clips)
    }

    fn with_state(model: Cpnet, params: ParamStore<f32>, adam: Adam, iteration: u64, clips: Vec<FrameClip>) -> Result<Self> {
        if clips.is_empty() {
            return Err(Error::invalid("the training set is empty"));
        }
        let t = model.seq_disc.frames();
        let r = model.resolution();
        for clip in &clips {
            if clip.len() < 2 * WINDOW_RADIUS + t {
                return Err(Error::invalid(format!(
                    "clip {} has {} frames; training on runs of {t} windows needs at least {}",
                    clip.name,
                    clip.len(),
                    2 * WINDOW_RADIUS + t
                )));
            }
            if (clip.height(), clip.width()) != (r, r) {
                return Err(Error::invalid(format!(
                    "clip {} is {}x{}, the model expects {r}x{r}",
                    clip.name,
                    clip.height(),
                    clip.width()
                )));
            }
        }
        Ok(Trainer {
            model,
            params,
            adam,
            iteration,
            clips,
            embeddings: HashMap::new(),
            maps: HashMap::new(),
        })
    }

    pub fn clips(&self) -> &[FrameClip] {
        &self.clips
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            iteration: self.iteration,
            config: self.model.config.clone(),
            params: self.params.clone(),
            adam: self.adam.clone(),
        }
    }

    /// The batch for `iteration`; a pure function of the seed and the iteration.
    pub fn batch(&mut self, iteration: u64) -> Result<Batch> {
        let config = &self.model.config;
        let t = self.model.seq_disc.frames();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ iteration.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut frames = Vec::with_capacity(config.batch_size * t);
        for _ in 0..config.batch_size {
            let c = rng.random_range(0..self.clips.len());
            let len = self.clips[c].len();
            let start = rng.random_range(WINDOW_RADIUS..=len - WINDOW_RADIUS - t);
            frames.extend((start..start + t).map(|f| (c, f)));
        }
        self.assemble(frames)
    }

    fn assemble(&mut self, frames: Vec<(usize, usize)>) -> Result<Batch> {
        let (r, teacher) = (self.model.resolution(), self.model.config.teacher_forcing);
        let mut inputs = Vec::with_capacity(frames.len());
        let mut landmarks = Vec::with_capacity(frames.len());
        let mut targets = Vec::with_capacity(frames.len());
        let mut maps = Vec::with_capacity(frames.len());
        let mut missing = Vec::new();
        for &(c, f) in &frames {
            let clip = &self.clips[c];
            let window = build_window(clip, f, teacher)?;
            inputs.push(window.to_tensor::<f32>());
            landmarks.push(window.landmark_tensor::<f32>());
            targets.push(clip.frames()[f].to_tensor::<f32>());
            let kernel = &self.model.kernel;
            let map = match self.maps.get(&(c, f)) {
                Some(m) => m.clone(),
                None => {
                    let m = make_probability_map(&clip.landmarks()[f], r, r, kernel)?
                        .to_tensor::<f32>()
                        .reshape(&[1, r, r])?;
                    self.maps.insert((c, f), m.clone());
                    m
                }
            };
            maps.push(map);
            if !self.embeddings.contains_key(&(c, f)) {
                missing.push((c, f, window));
            }
        }
        if !missing.is_empty() {
            let images: Vec<_> = missing.iter().map(|(_, _, w)| w.current_landmarks()).collect();
            let e = embed_batch(self.model.provider.as_ref(), &images)?;
            let d = self.model.provider.dim();
            for (row, (c, f, _)) in e.data().chunks(d).zip(&missing) {
                self.embeddings.insert((*c, *f), row.to_vec());
            }
        }
        let d = self.model.provider.dim();
        let mut emb = Vec::with_capacity(frames.len() * d);
        for key in &frames {
            emb.extend_from_slice(&self.embeddings[key]);
        }
        Ok(Batch {
            sequences: frames.len() / self.model.seq_disc.frames(),
            inputs: Tensor::stack(&inputs)?,
            landmarks: Tensor::stack(&landmarks)?,
            targets: Tensor::stack(&targets)?,
            target_maps: Tensor::stack(&maps)?,
            embeddings: Tensor::new(&[frames.len(), d], emb)?,
            frames,
        })
    }

    /// One round of updates: frame discriminator, sequence discriminator, map
    /// predictor, then generator and condenser head.
    pub fn train_step(&mut self, batch: &Batch) -> Result<LossRow> {
        let it = self.iteration + 1;
        let config = self.model.config.clone();
        let weights = config.effective_weights();
        let use_seq = weights.lambda_t > 0.0;
        let use_pred = weights.lambda_p > 0.0;
        let m = &self.model;
        let mut row = LossRow {
            iteration: it,
            ..Default::default()
        };

        // Generator forward; its backward runs last, against the updated critics.
        let g = Graph::<f32>::new();
        let gp = self.params.bind(&g, GENERATOR, true);
        let cp = self.params.bind(&g, CONDENSER, config.modules.condenser);
        let gates = if config.modules.condenser {
            Some(m.head.gates(&cp, g.constant(batch.embeddings.clone()))?)
        } else {
            None
        };
        let fake = m.generator.forward(&gp, g.constant(batch.inputs.clone()), gates.as_deref())?;
        let fake_value = (*fake.value()).clone();

        {
            let dg = Graph::<f32>::new();
            let dp = self.params.bind(&dg, FRAME_NAMESPACE, true);
            let cond = dg.constant(batch.landmarks.clone());
            let real = m.frame_disc.forward(&dp, cond, dg.constant(batch.targets.clone()))?;
            let fake_s = m.frame_disc.forward(&dp, cond, dg.constant(fake_value.clone()))?;
            let loss = lsgan_discriminator_loss(real, fake_s);
            row.d_adv = finite("d_adv", it, loss.item() as f64)?;
            let mut grads = dg.backward(loss);
            let grads = grads_of(&dp, &mut grads);
            self.adam.step(&mut self.params, FRAME_NAMESPACE, &grads)?;
        }
        if use_seq {
            let dg = Graph::<f32>::new();
            let dp = self.params.bind(&dg, SEQUENCE_NAMESPACE, true);
            let cond = dg.constant(batch.landmarks.clone());
            let real = m.seq_disc.forward(&dp, cond, dg.constant(batch.targets.clone()))?;
            let fake_s = m.seq_disc.forward(&dp, cond, dg.constant(fake_value.clone()))?;
            let loss = temporal_loss_d(real, fake_s);
            row.d_t = Some(finite("d_t", it, loss.item() as f64)?);
            let mut grads = dg.backward(loss);
            let grads = grads_of(&dp, &mut grads);
            self.adam.step(&mut self.params, SEQUENCE_NAMESPACE, &grads)?;
        }
        if use_pred {
            let pg = Graph::<f32>::new();
            let pp = self.params.bind(&pg, PREDICTOR, true);
            let pred_real = m.predictor.forward(&pp, pg.constant(batch.targets.clone()))?;
            let pred_fake = m.predictor.forward(&pp, pg.constant(fake_value.clone()))?;
            let target = pg.constant(batch.target_maps.clone());
            let loss = predictor_objective(pred_real, target, pred_fake, weights.lambda_dmp)?;
            row.l_dmp = Some(finite("l_dmp", it, loss.item() as f64)?);
            let mut grads = pg.backward(loss);
            let grads = grads_of(&pp, &mut grads);
            self.adam.step(&mut self.params, PREDICTOR, &grads)?;
        }

        let targets = g.constant(batch.targets.clone());
        let cond = g.constant(batch.landmarks.clone());
        let term = |name: &'static str, v: Var<'_, f32>| finite(name, it, v.item() as f64);
        let adv = {
            let dp = self.params.bind(&g, FRAME_NAMESPACE, false);
            let v = lsgan_generator_loss(m.frame_disc.forward(&dp, cond, fake)?);
            row.l_adv = Some(term("l_adv", v)?);
            v
        };
        let r = {
            let v = perceptual_loss(&m.extractor, fake, targets)?;
            row.l_r = Some(term("l_r", v)?);
            v
        };
        let t = if use_seq {
            let dp = self.params.bind(&g, SEQUENCE_NAMESPACE, false);
            let v = temporal_loss_g(m.seq_disc.forward(&dp, cond, fake)?);
            row.l_t = Some(term("l_t", v)?);
            Some(v)
        } else {
            None
        };
        let p = if use_pred {
            let pp = self.params.bind(&g, PREDICTOR, false);
            let map_fake = m.predictor.forward(&pp, fake)?;
            let reference = if config.loss.use_analytic_target_in_eq7 {
                g.constant(batch.target_maps.clone())
            } else {
                m.predictor.forward(&pp, targets)?
            };
            let v = probability_consistency_loss(map_fake, reference)?;
            row.l_p = Some(term("l_p", v)?);
            Some(v)
        } else {
            None
        };
        let adv = (weights.lambda_adv > 0.0).then_some(adv);
        let r = (weights.lambda_r > 0.0).then_some(r);
        let total = weighted_total(&weights, adv, r, t, p)?;
        row.total = term("total", total)?;
        let mut grads = g.backward(total);
        let gen_grads = grads_of(&gp, &mut grads);
        self.adam.step(&mut self.params, GENERATOR, &gen_grads)?;
        if config.modules.condenser {
            let head_grads = grads_of(&cp, &mut grads);
            self.adam.step(&mut self.params, CONDENSER, &head_grads)?;
        }
        self.iteration = it;
        Ok(row)
    }
}

/// Files produced by [`train`].
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub checkpoints: Vec<PathBuf>,
    pub log_path: PathBuf,
    pub rows: Vec<LossRow>,
    pub final_checkpoint: Checkpoint,
}

/// Trains to `config.iterations`, logging every `log_interval` steps (and the
/// last one) and checkpointing every `checkpoint_interval` steps (and the last
/// one) into `config.output_dir`. With `resume`, continues from that
/// checkpoint and keeps the earlier part of the existing log.
pub fn train(config: &TrainConfig, clips: Vec<FrameClip>, resume: Option<&Path>) -> Result<TrainOutcome> {
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let log_path = out.join(LOG_FILE);
    let (mut trainer, mut rows) = match resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            let start = ckpt.iteration;
            let trainer = Trainer::resume(config, ckpt, clips).map_err(|e| match e {
                Error::Checkpoint { reason, .. } => Error::Checkpoint {
                    path: path.to_path_buf(),
                    reason,
                },
                other => other,
            })?;
            let rows = if log_path.exists() {
                read_log(&log_path)?.into_iter().filter(|r| r.iteration <= start).collect()
            } else {
                Vec::new()
            };
            (trainer, rows)
        }
        None => (Trainer::new(config, clips)?, Vec::new()),
    };
    std::fs::write(out.join("config.toml"), config.to_toml()).map_err(|e| Error::io(out, e))?;
    let mut checkpoints = Vec::new();
    write_log(&log_path, &rows)?;
    let mut log = csv::WriterBuilder::new().has_headers(false).from_writer(
        std::fs::OpenOptions::new()
            .append(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?,
    );
    while trainer.iteration < config.iterations {
        let it = trainer.iteration + 1;
        let batch = trainer.batch(it)?;
        let row = trainer.train_step(&batch)?;
        let last = it == config.iterations;
        if it % config.log_interval == 0 || last {
            log.write_record(row.cells())?;
            log.flush().map_err(|e| Error::io(&log_path, e))?;
            rows.push(row);
        }
        if it % config.checkpoint_interval == 0 || last {
            let path = out.join(checkpoint_name(it));
            trainer.checkpoint().save(&path)?;
            checkpoints.push(path);
        }
    }
    Ok(TrainOutcome {
        checkpoints,
        log_path,
        rows,
        final_checkpoint: trainer.checkpoint(),
    })
}
