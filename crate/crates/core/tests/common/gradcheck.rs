//! Central-difference checks of directional derivatives in f64.

use cpnet::condenser::CondenserHead;
use cpnet::disc::{Discriminator, DiscriminatorConfig, DiscriminatorKind};
use cpnet::generator::{Generator, GeneratorConfig};
use cpnet::losses::{
    lsgan_discriminator_loss, lsgan_generator_loss, perceptual_loss, probability_consistency_loss, temporal_loss_d,
    temporal_loss_g, weighted_total, Extractor, LossWeights,
};
use cpnet::nn::{Bound, Graph, ParamStore, Tensor, Var};
use cpnet::prob::{predictor_objective, Predictor, PredictorConfig};
use cpnet::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const RES: usize = 8;
pub const REL_TOL: f64 = 1e-3;
const STEP: f64 = 1e-5;
/// Derivatives below this are compared absolutely; both sides are then noise.
const ABS_FLOOR: f64 = 1e-8;

type Objective = Box<dyn for<'g> Fn(&'g Graph<f64>, &Bound<'g, f64>, &Bound<'g, f64>) -> Result<Var<'g, f64>>>;

/// A scalar function of the tensors in `store`. Entries under a `frozen`
/// namespace are bound as constants and never perturbed.
pub struct Case {
    pub name: &'static str,
    store: ParamStore<f64>,
    frozen: Vec<&'static str>,
    objective: Objective,
}

#[derive(Debug)]
pub struct Probe {
    pub analytic: f64,
    pub numeric: f64,
}

impl Probe {
    pub fn passes(&self) -> bool {
        let scale = self.analytic.abs().max(self.numeric.abs());
        scale < ABS_FLOOR || (self.analytic - self.numeric).abs() <= REL_TOL * scale
    }
}

impl Case {
    fn is_frozen(&self, name: &str) -> bool {
        self.frozen.iter().any(|ns| name.split('/').next() == Some(*ns))
    }

    fn namespaces(&self) -> Vec<String> {
        let mut ns: Vec<String> = self.store.iter().map(|(k, _)| k.split('/').next().unwrap().to_string()).collect();
        ns.dedup();
        ns
    }

    fn bind<'g>(&self, g: &'g Graph<f64>, store: &ParamStore<f64>, trainable: bool) -> (Bound<'g, f64>, Bound<'g, f64>) {
        let mut free = ParamStore::<f64>::new().bind(g, "", false);
        let mut fixed = ParamStore::<f64>::new().bind(g, "", false);
        for ns in self.namespaces() {
            if self.is_frozen(&ns) {
                fixed.extend(store.bind(g, &ns, false));
            } else {
                free.extend(store.bind(g, &ns, trainable));
            }
        }
        (free, fixed)
    }

    fn value(&self, store: &ParamStore<f64>) -> f64 {
        let g = Graph::new();
        let (free, fixed) = self.bind(&g, store, false);
        (self.objective)(&g, &free, &fixed).expect("objective").item()
    }

    fn direction(&self, rng: &mut ChaCha8Rng) -> ParamStore<f64> {
        let mut u = ParamStore::new();
        let mut norm = 0.0;
        for (k, t) in self.store.iter().filter(|(k, _)| !self.is_frozen(k)) {
            let d = Tensor::from_fn(t.shape(), |_| rng.sample::<f64, _>(StandardNormal));
            norm += d.data().iter().map(|v| v * v).sum::<f64>();
            u.insert(k.clone(), d);
        }
        let norm = norm.sqrt();
        let mut unit = ParamStore::new();
        for (k, d) in u.iter() {
            unit.insert(k.clone(), d.map(|v| v / norm));
        }
        unit
    }

    fn shifted(&self, u: &ParamStore<f64>, h: f64) -> ParamStore<f64> {
        let mut s = self.store.clone();
        for (k, d) in u.iter() {
            let t = s.get_mut(k).unwrap();
            for (x, dx) in t.data_mut().iter_mut().zip(d.data()) {
                *x += h * dx;
            }
        }
        s
    }

    /// Compares `∇f · u` with `(f(x + hu) − f(x − hu)) / 2h` along random unit directions.
    pub fn probe(&self, directions: usize, seed: u64) -> Vec<Probe> {
        let g = Graph::new();
        let (free, fixed) = self.bind(&g, &self.store, true);
        let out = (self.objective)(&g, &free, &fixed).expect("objective");
        let grads = g.backward(out);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..directions)
            .map(|_| {
                let u = self.direction(&mut rng);
                let analytic = free
                    .iter()
                    .map(|(k, v)| {
                        let d = u.get(k).unwrap();
                        grads
                            .get(*v)
                            .map_or(0.0, |gr| gr.data().iter().zip(d.data()).map(|(a, b)| a * b).sum())
                    })
                    .sum();
                let numeric = (self.value(&self.shifted(&u, STEP)) - self.value(&self.shifted(&u, -STEP))) / (2.0 * STEP);
                Probe { analytic, numeric }
            })
            .collect()
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

fn predictor() -> Predictor {
    Predictor::new(PredictorConfig {
        base_width: 4,
        resolution: RES,
    })
    .unwrap()
}

fn disc(kind: DiscriminatorKind, sequence_length: usize) -> Discriminator {
    let config = DiscriminatorConfig {
        base_width: 4,
        levels: 2,
        sequence_length,
    };
    Discriminator::new(kind, config, 7).unwrap()
}

fn inputs(rng: &mut ChaCha8Rng, n: usize) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    s.insert("input/x", random(rng, &[n, 7, RES, RES], 0.0, 1.0));
    s.insert("input/y", random(rng, &[n, 3, RES, RES], 0.0, 1.0));
    s.insert("input/s", random(rng, &[n, 3, RES, RES], 0.0, 1.0));
    s
}

fn merge(into: &mut ParamStore<f64>, from: ParamStore<f64>) {
    for (k, v) in from.iter() {
        into.insert(k.clone(), v.clone());
    }
}

/// The predictor objective, both sides of the frame and sequence adversarial
/// losses, the perceptual loss through the stub extractor, map consistency
/// through a frozen predictor, and the weighted generator objective through
/// the full generator with gating.
pub fn cases() -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out = Vec::new();

    let p = predictor();
    let mut store = inputs(&mut rng, 2);
    store.insert("input/target", random(&mut rng, &[2, 1, RES, RES], 0.0, 0.2));
    merge(&mut store, p.init(11));
    let pp = p.clone();
    out.push(Case {
        name: "predictor objective",
        store,
        frozen: vec![],
        objective: Box::new(move |_, b, _| {
            let real = pp.forward(b, b.get("input/y")?)?;
            let fake = pp.forward(b, b.get("input/s")?)?;
            predictor_objective(real, b.get("input/target")?, fake, 0.1)
        }),
    });

    let d = disc(DiscriminatorKind::Frame, 1);
    let mut store = inputs(&mut rng, 2);
    merge(&mut store, d.init(12));
    let dd = d.clone();
    out.push(Case {
        name: "frame adversarial, discriminator side",
        store: store.clone(),
        frozen: vec![],
        objective: Box::new(move |_, b, _| {
            let x = b.get("input/x")?;
            Ok(lsgan_discriminator_loss(dd.forward(b, x, b.get("input/y")?)?, dd.forward(b, x, b.get("input/s")?)?))
        }),
    });
    let dd = d.clone();
    out.push(Case {
        name: "frame adversarial, generator side",
        store,
        frozen: vec![],
        objective: Box::new(move |_, b, _| Ok(lsgan_generator_loss(dd.forward(b, b.get("input/x")?, b.get("input/s")?)?))),
    });

    out.push(Case {
        name: "perceptual",
        store: inputs(&mut rng, 2),
        frozen: vec![],
        objective: Box::new(|_, b, _| perceptual_loss(&Extractor::Stub { seed: 3 }, b.get("input/s")?, b.get("input/y")?)),
    });

    let d = disc(DiscriminatorKind::Sequence, 3);
    let mut store = inputs(&mut rng, 6);
    merge(&mut store, d.init(13));
    let dd = d.clone();
    out.push(Case {
        name: "temporal, discriminator side",
        store: store.clone(),
        frozen: vec![],
        objective: Box::new(move |_, b, _| {
            let x = b.get("input/x")?;
            Ok(temporal_loss_d(dd.forward(b, x, b.get("input/y")?)?, dd.forward(b, x, b.get("input/s")?)?))
        }),
    });
    out.push(Case {
        name: "temporal, generator side",
        store,
        frozen: vec![],
        objective: Box::new(move |_, b, _| Ok(temporal_loss_g(d.forward(b, b.get("input/x")?, b.get("input/s")?)?))),
    });

    let mut store = inputs(&mut rng, 2);
    merge(&mut store, p.init(14));
    let pp = p.clone();
    out.push(Case {
        name: "probability consistency",
        store,
        frozen: vec!["predictor"],
        objective: Box::new(move |_, b, frozen| {
            probability_consistency_loss(pp.forward(frozen, b.get("input/s")?)?, pp.forward(frozen, b.get("input/y")?)?)
        }),
    });

    let gen = Generator::new(GeneratorConfig {
        base_width: 8,
        encoder_levels: 3,
        transition_blocks: 1,
        resolution: RES,
        ..Default::default()
    })
    .unwrap();
    let head = CondenserHead::new(4, gen.hooked_channels());
    let frame = disc(DiscriminatorKind::Frame, 1);
    let seq = disc(DiscriminatorKind::Sequence, 2);
    let mut store = inputs(&mut rng, 2);
    store.insert("input/v", random(&mut rng, &[2, 4], -1.0, 1.0));
    merge(&mut store, gen.init(15));
    merge(&mut store, head.init(16));
    merge(&mut store, frame.init(17));
    merge(&mut store, seq.init(18));
    merge(&mut store, p.init(19));
    out.push(Case {
        name: "full generator objective",
        store,
        frozen: vec!["disc_frame", "disc_seq", "predictor"],
        objective: Box::new(move |_, b, frozen| {
            let x = b.get("input/x")?;
            let y = b.get("input/y")?;
            let gates = head.gates(b, b.get("input/v")?)?;
            let s = gen.forward(b, x, Some(&gates))?;
            let adv = lsgan_generator_loss(frame.forward(frozen, x, s)?);
            let r = perceptual_loss(&Extractor::Stub { seed: 3 }, s, y)?;
            let t = temporal_loss_g(seq.forward(frozen, x, s)?);
            let pc = probability_consistency_loss(p.forward(frozen, s)?, p.forward(frozen, y)?)?;
            weighted_total(&LossWeights::default(), Some(adv), Some(r), Some(t), Some(pc))
        }),
    });
    out
}
