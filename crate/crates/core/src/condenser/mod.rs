//! Channel gating driven by an image embedding of the current landmark frame.
//!
//! An [`EmbeddingProvider`] turns the landmark image into a vector `v`; the
//! [`CondenserHead`] maps it to one sigmoid weight per channel of every hooked
//! generator layer, and [`recalibrate`] multiplies those channels in place.

pub mod clip_vit;
mod stub;

pub use clip_vit::ClipVisionProvider;
pub use stub::{embed_batch, StubProvider};

use crate::data::Image;
use crate::error::{Error, Result};
use crate::nn::params::INIT_STD;
use crate::nn::{Bound, Element, Graph, Initializer, ParamStore, Tensor, Var};

pub const NAMESPACE: &str = "condenser";

/// Maps an image to a fixed-length embedding. Implementations are frozen and
/// deterministic, and must tolerate concurrent calls.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, image: &Image) -> Result<Vec<f32>>;
}

/// One linear map `W_l: R^d -> R^{C_l}` per hooked layer, without bias.
#[derive(Clone, Debug, PartialEq)]
pub struct CondenserHead {
    pub dim: usize,
    pub layer_channels: Vec<usize>,
}

impl CondenserHead {
    pub fn new(dim: usize, layer_channels: Vec<usize>) -> Self {
        CondenserHead {
            dim,
            layer_channels,
        }
    }

    pub fn weight_name(layer: usize) -> String {
        format!("{NAMESPACE}/gate{layer}/weight")
    }

    pub fn init<E: Element>(&self, seed: u64) -> ParamStore<E> {
        let init = Initializer::new(seed);
        let mut store = ParamStore::new();
        for (l, &c) in self.layer_channels.iter().enumerate() {
            let name = Self::weight_name(l);
            let w = init.normal(&name, &[c, self.dim], INIT_STD);
            store.insert(name, w);
        }
        store
    }

    /// `σ(W_l v)` for every hooked layer; `v` is `[N, d]`, outputs are `[N, C_l]`.
    pub fn gates<'g, E: Element>(&self, p: &Bound<'g, E>, v: Var<'g, E>) -> Result<Vec<Var<'g, E>>> {
        let shape = v.shape();
        if shape.len() != 2 || shape[1] != self.dim {
            return Err(Error::shape(
                "condenser gates",
                format!("embedding {shape:?} for a head of dimension {}", self.dim),
            ));
        }
        (0..self.layer_channels.len())
            .map(|l| Ok(v.matmul_nt(p.get(&Self::weight_name(l))?)?.sigmoid()))
            .collect()
    }
}

/// Gating weights of one embedding, one vector per hooked layer.
pub fn gating_weights(head: &CondenserHead, params: &ParamStore<f64>, v: &[f64]) -> Result<Vec<Vec<f64>>> {
    if v.len() != head.dim {
        return Err(Error::shape(
            "gating_weights",
            format!("embedding has {} entries, head expects {}", v.len(), head.dim),
        ));
    }
    let g = Graph::<f64>::new();
    let p = params.bind(&g, NAMESPACE, false);
    let v = g.constant(Tensor::new(&[1, v.len()], v.to_vec())?);
    Ok(head
        .gates(&p, v)?
        .into_iter()
        .map(|w| w.value().data().to_vec())
        .collect())
}

/// Scales channel `c` of `[N, C, H, W]` features by `w[n, c]`.
pub fn recalibrate<'g, E: Element>(x: Var<'g, E>, w: Var<'g, E>) -> Result<Var<'g, E>> {
    x.channel_scale(w)
}

/// [`recalibrate`] for a single `[C, H, W]` feature map.
pub fn recalibrate_map<E: Element>(x: &Tensor<E>, w: &[E]) -> Result<Tensor<E>> {
    let &[c, h, wd] = x.shape() else {
        return Err(Error::shape("recalibrate_map", format!("expected [C, H, W], got {:?}", x.shape())));
    };
    let g = Graph::<E>::new();
    let xv = g.constant(x.clone().reshape(&[1, c, h, wd])?);
    let wv = g.constant(Tensor::new(&[1, w.len()], w.to_vec())?);
    Ok((*recalibrate(xv, wv)?.value()).clone().reshape(&[c, h, wd])?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_gate_at_one_half() {
        let head = CondenserHead::new(4, vec![3, 2]);
        let mut params = head.init::<f64>(0);
        for l in 0..2 {
            let w = params.get_mut(&CondenserHead::weight_name(l)).unwrap();
            w.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let gates = gating_weights(&head, &params, &[0.3, -1.0, 2.0, 0.5]).unwrap();
        assert_eq!(gates, vec![vec![0.5; 3], vec![0.5; 2]]);
    }

    #[test]
    fn rejects_mismatched_embedding() {
        let head = CondenserHead::new(4, vec![3]);
        let params = head.init::<f64>(0);
        assert!(gating_weights(&head, &params, &[1.0; 5]).is_err());
    }

    #[test]
    fn recalibrate_rejects_wrong_length() {
        let x = Tensor::<f64>::ones(&[2, 2, 2]);
        assert!(recalibrate_map(&x, &[1.0]).is_err());
    }
}
