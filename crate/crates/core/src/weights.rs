//! Reading pretrained weights stored as safetensors archives.

use std::collections::BTreeMap;
use std::path::Path;

use safetensors::{Dtype, SafeTensors};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Every tensor in the archive, converted to `f32`. Accepts F32, F64 and BF16 entries.
pub(crate) fn load_safetensors(path: &Path, backend: &'static str) -> Result<BTreeMap<String, Tensor<f32>>> {
    let fail = |reason: String| Error::BackendLoad {
        backend,
        path: path.to_path_buf(),
        reason,
    };
    let bytes = std::fs::read(path).map_err(|e| fail(e.to_string()))?;
    let archive = SafeTensors::deserialize(&bytes).map_err(|e| fail(e.to_string()))?;
    let mut out = BTreeMap::new();
    for (name, view) in archive.tensors() {
        let raw = view.data();
        let data: Vec<f32> = match view.dtype() {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect(),
            Dtype::F64 => raw
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()) as f32)
                .collect(),
            Dtype::BF16 => raw
                .chunks_exact(2)
                .map(|b| f32::from_bits((u16::from_le_bytes([b[0], b[1]]) as u32) << 16))
                .collect(),
            other => return Err(fail(format!("tensor `{name}` has unsupported dtype {other:?}"))),
        };
        let tensor = Tensor::new(view.shape(), data).map_err(|e| fail(e.to_string()))?;
        out.insert(name, tensor);
    }
    Ok(out)
}

/// Removes `name` from `tensors`, checking its shape when `shape` is given.
pub(crate) fn take(
    tensors: &mut BTreeMap<String, Tensor<f32>>,
    name: &str,
    shape: Option<&[usize]>,
    backend: &'static str,
    path: &Path,
) -> Result<Tensor<f32>> {
    let fail = |reason: String| Error::BackendLoad {
        backend,
        path: path.to_path_buf(),
        reason,
    };
    let t = tensors
        .remove(name)
        .ok_or_else(|| fail(format!("missing tensor `{name}`")))?;
    if let Some(shape) = shape {
        if t.shape() != shape {
            return Err(fail(format!(
                "tensor `{name}` has shape {:?}, expected {shape:?}",
                t.shape()
            )));
        }
    }
    Ok(t)
}
