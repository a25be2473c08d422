//! Named parameter storage and the layer building blocks shared by the networks.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::graph::{Graph, Var};
use super::tensor::{Element, Tensor};
use crate::error::{Error, Result};

/// Named tensors, ordered by key. Keys are `/`-separated paths whose first
/// segment is the owning network's namespace (`generator/enc1/weight`).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamStore<E: Element = f32> {
    tensors: BTreeMap<String, Tensor<E>>,
}

impl<E: Element> ParamStore<E> {
    pub fn new() -> Self {
        ParamStore {
            tensors: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<E>) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<E>> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::invalid(format!("no parameter named `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<E>> {
        self.tensors.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<E>)> {
        self.tensors.iter()
    }

    /// Entries whose key starts with `namespace/`.
    pub fn namespace<'a>(&'a self, namespace: &'a str) -> impl Iterator<Item = (&'a String, &'a Tensor<E>)> + 'a {
        self.tensors
            .iter()
            .filter(move |(k, _)| k.split('/').next() == Some(namespace))
    }

    pub fn has_namespace(&self, namespace: &str) -> bool {
        self.namespace(namespace).next().is_some()
    }

    pub fn numel(&self, namespace: &str) -> usize {
        self.namespace(namespace).map(|(_, t)| t.numel()).sum()
    }

    /// Copies every entry of `other` under `namespace/` into this store.
    pub fn merge_namespace(&mut self, other: &ParamStore<E>, namespace: &str) {
        for (k, v) in other.namespace(namespace) {
            self.tensors.insert(k.clone(), v.clone());
        }
    }

    pub fn cast<F: Element>(&self) -> ParamStore<F> {
        ParamStore {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast()))
                .collect(),
        }
    }

    /// Places the `namespace/` entries on `graph`, as trainable leaves or as constants.
    pub fn bind<'g>(&self, graph: &'g Graph<E>, namespace: &str, trainable: bool) -> Bound<'g, E> {
        let vars = self
            .namespace(namespace)
            .map(|(k, v)| {
                let var = if trainable {
                    graph.param(v.clone())
                } else {
                    graph.constant(v.clone())
                };
                (k.clone(), var)
            })
            .collect();
        Bound { vars }
    }
}

/// Parameters placed on a graph.
pub struct Bound<'g, E: Element = f32> {
    vars: BTreeMap<String, Var<'g, E>>,
}

impl<'g, E: Element> Bound<'g, E> {
    pub fn get(&self, name: &str) -> Result<Var<'g, E>> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::invalid(format!("parameter `{name}` is not bound")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var<'g, E>)> {
        self.vars.iter()
    }

    pub fn extend(&mut self, other: Bound<'g, E>) {
        self.vars.extend(other.vars);
    }
}

/// Deterministic parameter initializer; each tensor draws from its own stream
/// keyed by name, so adding a layer does not perturb the others.
pub struct Initializer {
    seed: u64,
}

impl Initializer {
    pub fn new(seed: u64) -> Self {
        Initializer { seed }
    }

    fn rng_for(&self, name: &str) -> ChaCha8Rng {
        // FNV-1a over the name, mixed with the seed.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        ChaCha8Rng::seed_from_u64(h ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    pub fn normal<E: Element>(&self, name: &str, shape: &[usize], std: f64) -> Tensor<E> {
        let mut rng = self.rng_for(name);
        let dist = Normal::new(0.0, std).expect("finite std");
        Tensor::from_fn(shape, |_| E::from_f64(dist.sample(&mut rng)))
    }
}

/// A convolution layer: names and hyperparameters; the weights live in a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub bias: bool,
}

impl Conv2d {
    pub fn new(name: impl Into<String>, in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Conv2d {
            name: name.into(),
            in_channels,
            out_channels,
            kernel,
            stride: 1,
            pad: kernel / 2,
            bias: true,
        }
    }

    /// Kernel 4, stride 2, padding 1: halves the spatial size.
    pub fn down(name: impl Into<String>, in_channels: usize, out_channels: usize) -> Self {
        Conv2d {
            stride: 2,
            pad: 1,
            ..Self::new(name, in_channels, out_channels, 4)
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn weight_name(&self) -> String {
        format!("{}/weight", self.name)
    }

    pub fn bias_name(&self) -> String {
        format!("{}/bias", self.name)
    }

    pub fn weight_shape(&self) -> [usize; 4] {
        [self.out_channels, self.in_channels, self.kernel, self.kernel]
    }

    pub fn num_params(&self) -> usize {
        self.weight_shape().iter().product::<usize>() + if self.bias { self.out_channels } else { 0 }
    }

    /// Normal(0, std) weights and zero bias.
    pub fn init<E: Element>(&self, store: &mut ParamStore<E>, init: &Initializer, std: f64) {
        let name = self.weight_name();
        let w = init.normal(&name, &self.weight_shape(), std);
        store.insert(name, w);
        if self.bias {
            store.insert(self.bias_name(), Tensor::zeros(&[self.out_channels]));
        }
    }

    pub fn forward<'g, E: Element>(&self, params: &Bound<'g, E>, x: Var<'g, E>) -> Result<Var<'g, E>> {
        let w = params.get(&self.weight_name())?;
        let b = if self.bias {
            Some(params.get(&self.bias_name())?)
        } else {
            None
        };
        x.conv2d(w, b, self.stride, self.pad)
    }
}

/// Standard deviation used for convolution weights throughout (pix2pix-style init).
pub const INIT_STD: f64 = 0.02;

/// Epsilon of every instance normalization.
pub const NORM_EPS: f64 = 1e-5;

/// Slope of the leaky rectifiers in encoders and discriminators.
pub const LEAKY_SLOPE: f64 = 0.2;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initializer_is_keyed_by_name() {
        let init = Initializer::new(7);
        let a: Tensor<f32> = init.normal("a/weight", &[4], 1.0);
        let a2: Tensor<f32> = init.normal("a/weight", &[4], 1.0);
        let b: Tensor<f32> = init.normal("b/weight", &[4], 1.0);
        assert_eq!(a, a2);
        assert_ne!(a, b);
        let other_seed: Tensor<f32> = Initializer::new(8).normal("a/weight", &[4], 1.0);
        assert_ne!(a, other_seed);
    }

    #[test]
    fn namespace_filter_matches_whole_segment() {
        let mut store = ParamStore::<f32>::new();
        store.insert("disc_frame/a", Tensor::zeros(&[1]));
        store.insert("disc_frame_extra/a", Tensor::zeros(&[1]));
        assert_eq!(store.namespace("disc_frame").count(), 1);
    }
}
