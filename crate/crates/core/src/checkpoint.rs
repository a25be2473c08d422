//! Single-file checkpoints in the safetensors layout: an 8-byte little-endian
//! header length, a JSON header with sorted keys, then raw `F32` data.
//! Training metadata travels as a JSON document in `__metadata__`.

use std::collections::BTreeMap;
use std::path::Path;

use safetensors::{Dtype, SafeTensors};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::{Adam, ParamStore, Tensor};

pub const FORMAT_VERSION: u32 = 1;
pub const NAMESPACES: [&str; 5] = ["generator", "condenser", "disc_frame", "disc_seq", "predictor"];
const META_KEY: &str = "cpnet";
const OPTIM_PREFIX: &str = "optim/";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Metadata {
    format_version: u32,
    iteration: u64,
    config: TrainConfig,
    adam_steps: BTreeMap<String, u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub iteration: u64,
    pub config: TrainConfig,
    pub params: ParamStore<f32>,
    pub adam: Adam,
}

impl Checkpoint {
    /// Fails with [`Error::MissingNamespace`] naming the first absent network.
    pub fn check_namespaces(&self) -> Result<()> {
        match NAMESPACES.iter().find(|ns| !self.params.has_namespace(ns)) {
            Some(ns) => Err(Error::MissingNamespace(ns.to_string())),
            None => Ok(()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = Metadata {
            format_version: FORMAT_VERSION,
            iteration: self.iteration,
            config: self.config.clone(),
            adam_steps: self.adam.step_counts().clone(),
        };
        let mut entries: BTreeMap<String, &Tensor<f32>> = BTreeMap::new();
        for (k, t) in self.params.iter() {
            entries.insert(k.clone(), t);
        }
        let moments = self.adam.moments();
        for (k, t) in moments.iter() {
            entries.insert(format!("{OPTIM_PREFIX}{k}"), t);
        }
        let mut header = Map::new();
        let mut offset = 0usize;
        for (k, t) in &entries {
            let len = t.numel() * 4;
            header.insert(
                k.clone(),
                json!({"dtype": "F32", "shape": t.shape(), "data_offsets": [offset, offset + len]}),
            );
            offset += len;
        }
        let mut meta_map = Map::new();
        meta_map.insert(
            META_KEY.into(),
            Value::String(serde_json::to_string(&meta).expect("metadata serializes")),
        );
        header.insert("__metadata__".into(), Value::Object(meta_map));
        let mut header = serde_json::to_vec(&Value::Object(header)).expect("header serializes");
        while header.len() % 8 != 0 {
            header.push(b' ');
        }
        let mut out = Vec::with_capacity(8 + header.len() + offset);
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in entries.values() {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |reason: String| Error::Checkpoint {
            path: path.to_path_buf(),
            reason,
        };
        let (_, st_meta) = SafeTensors::read_metadata(bytes).map_err(|e| fail(e.to_string()))?;
        let doc = st_meta
            .metadata()
            .as_ref()
            .and_then(|m| m.get(META_KEY))
            .ok_or_else(|| fail("no training metadata (not a cpnet checkpoint?)".into()))?;
        let raw: Value = serde_json::from_str(doc).map_err(|e| fail(e.to_string()))?;
        match raw.get("format_version").and_then(Value::as_u64) {
            Some(v) if v == FORMAT_VERSION as u64 => {}
            Some(v) => return Err(fail(format!("format version {v}, this build reads {FORMAT_VERSION}"))),
            None => return Err(fail("metadata lacks format_version".into())),
        }
        let meta: Metadata = serde_json::from_value(raw).map_err(|e| fail(e.to_string()))?;
        let archive = SafeTensors::deserialize(bytes).map_err(|e| fail(e.to_string()))?;
        let mut params = ParamStore::new();
        let mut moments = ParamStore::new();
        for (name, view) in archive.tensors() {
            if view.dtype() != Dtype::F32 {
                return Err(fail(format!("tensor `{name}` is {:?}, expected F32", view.dtype())));
            }
            let data = view
                .data()
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect();
            let t = Tensor::new(view.shape(), data).map_err(|e| fail(e.to_string()))?;
            match name.strip_prefix(OPTIM_PREFIX) {
                Some(k) => moments.insert(k, t),
                None => params.insert(name, t),
            }
        }
        let adam = Adam::restore(meta.config.adam(), &moments, meta.adam_steps).map_err(|e| fail(e.to_string()))?;
        Ok(Checkpoint {
            iteration: meta.iteration,
            config: meta.config,
            params,
            adam,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::Checkpoint {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
        }
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Checkpoint {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_bytes(&bytes, path)
    }
}

/// File name of the checkpoint written after `iteration`.
pub fn checkpoint_name(iteration: u64) -> String {
    format!("ckpt_{iteration:07}.safetensors")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut params = ParamStore::new();
        for ns in NAMESPACES {
            params.insert(format!("{ns}/w"), Tensor::new(&[2, 3], vec![0.5, -1.0, 2.0, 1e-8, 3.25, -0.0]).unwrap());
        }
        let mut adam = Adam::new(TrainConfig::default().adam());
        let mut grads = BTreeMap::new();
        grads.insert("generator/w".to_string(), Tensor::full(&[2, 3], 0.1));
        adam.step(&mut params, "generator", &grads).unwrap();
        Checkpoint {
            iteration: 7,
            config: TrainConfig::default(),
            params,
            adam,
        }
    }

    #[test]
    fn bytes_round_trip_exactly() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn missing_namespace_is_named() {
        let mut c = sample();
        let mut params = ParamStore::new();
        for (k, v) in c.params.iter().filter(|(k, _)| !k.starts_with("disc_seq/")) {
            params.insert(k.clone(), v.clone());
        }
        c.params = params;
        match c.check_namespaces() {
            Err(Error::MissingNamespace(ns)) => assert_eq!(ns, "disc_seq"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn foreign_archives_are_rejected() {
        assert!(Checkpoint::from_bytes(b"garbage", Path::new("x")).is_err());
    }
}
