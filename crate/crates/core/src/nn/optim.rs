use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for every parameter it has touched, plus a step counter per
/// namespace (networks are updated independently).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    first: BTreeMap<String, Tensor<f32>>,
    second: BTreeMap<String, Tensor<f32>>,
    steps: BTreeMap<String, u64>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            ..Default::default()
        }
    }

    pub fn steps(&self, namespace: &str) -> u64 {
        self.steps.get(namespace).copied().unwrap_or(0)
    }

    /// Applies one bias-corrected Adam update to the `namespace` parameters
    /// listed in `grads`.
    pub fn step(
        &mut self,
        params: &mut ParamStore<f32>,
        namespace: &str,
        grads: &BTreeMap<String, Tensor<f32>>,
    ) -> Result<()> {
        let t = self.steps.entry(namespace.to_string()).or_insert(0);
        *t += 1;
        let t = *t as i32;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        let (b1, b2) = (beta1 as f32, beta2 as f32);
        let step_size = (learning_rate / c1) as f32;
        let c2_sqrt = c2.sqrt() as f32;
        let eps = eps as f32;
        for (name, grad) in grads {
            let param = params
                .get_mut(name)
                .ok_or_else(|| Error::invalid(format!("gradient for unknown parameter `{name}`")))?;
            if param.shape() != grad.shape() {
                return Err(Error::shape(
                    "Adam::step",
                    format!("{name}: {:?} vs {:?}", param.shape(), grad.shape()),
                ));
            }
            let m = self
                .first
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(grad.shape()));
            let v = self
                .second
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(grad.shape()));
            for (((p, m), v), &g) in param
                .data_mut()
                .iter_mut()
                .zip(m.data_mut())
                .zip(v.data_mut())
                .zip(grad.data())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= step_size * *m / (v.sqrt() / c2_sqrt + eps);
            }
        }
        Ok(())
    }

    /// Moments as a flat store: `m/<param>` and `v/<param>`.
    pub fn moments(&self) -> ParamStore<f32> {
        let mut store = ParamStore::new();
        for (k, t) in &self.first {
            store.insert(format!("m/{k}"), t.clone());
        }
        for (k, t) in &self.second {
            store.insert(format!("v/{k}"), t.clone());
        }
        store
    }

    pub fn step_counts(&self) -> &BTreeMap<String, u64> {
        &self.steps
    }

    pub fn restore(
        config: AdamConfig,
        moments: &ParamStore<f32>,
        steps: BTreeMap<String, u64>,
    ) -> Result<Self> {
        let mut adam = Adam::new(config);
        for (k, t) in moments.iter() {
            if let Some(name) = k.strip_prefix("m/") {
                adam.first.insert(name.to_string(), t.clone());
            } else if let Some(name) = k.strip_prefix("v/") {
                adam.second.insert(name.to_string(), t.clone());
            } else {
                return Err(Error::invalid(format!("unexpected optimizer entry `{k}`")));
            }
        }
        adam.steps = steps;
        Ok(adam)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // With bias correction the first update is lr * g / (|g| + eps).
        let mut params = ParamStore::new();
        params.insert("net/w", Tensor::new(&[2], vec![1.0, -1.0]).unwrap());
        let mut grads = BTreeMap::new();
        grads.insert("net/w".to_string(), Tensor::new(&[2], vec![0.5, -2.0]).unwrap());
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params, "net", &grads).unwrap();
        let w = params.get("net/w").unwrap().data();
        assert!((w[0] - (1.0 - 1e-4)).abs() < 1e-7);
        assert!((w[1] - (-1.0 + 1e-4)).abs() < 1e-7);
        assert_eq!(adam.steps("net"), 1);
        assert_eq!(adam.steps("other"), 0);
    }

    #[test]
    fn restore_round_trips_state() {
        let mut params = ParamStore::new();
        params.insert("net/w", Tensor::new(&[1], vec![0.3]).unwrap());
        let mut grads = BTreeMap::new();
        grads.insert("net/w".to_string(), Tensor::new(&[1], vec![0.1]).unwrap());
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut params, "net", &grads).unwrap();
        let restored =
            Adam::restore(adam.config, &adam.moments(), adam.step_counts().clone()).unwrap();
        assert_eq!(restored, adam);
    }
}
