use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::EmbeddingProvider;
use crate::data::Image;
use crate::error::{Error, Result};
use crate::nn::{Graph, Tensor};

/// Side length the stub downsamples its input to before projecting.
pub const STUB_INPUT_SIZE: usize = 32;

/// A fixed random projection of the 32x32 average-pooled image, scaled to
/// unit length. A stand-in for a pretrained encoder in tests and toy runs.
#[derive(Clone, Debug)]
pub struct StubProvider {
    dim: usize,
    /// Row-major `[dim, 32 * 32]`.
    projection: Vec<f32>,
}

impl StubProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("stub embedding dimension must be positive".into()));
        }
        let n = STUB_INPUT_SIZE * STUB_INPUT_SIZE;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x636c_6970_7374_7562);
        let scale = 1.0 / (n as f64).sqrt();
        let projection = (0..dim * n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (z * scale) as f32
            })
            .collect();
        Ok(StubProvider { dim, projection })
    }
}

impl EmbeddingProvider for StubProvider {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, image: &Image) -> Result<Vec<f32>> {
        let (c, h, w) = (image.channels(), image.height(), image.width());
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::shape("stub embed", format!("empty image {image:?}")));
        }
        let g = Graph::<f32>::new();
        let x = g.constant(image.to_tensor::<f32>().reshape(&[1, c, h, w])?);
        let small = x.resize_to(STUB_INPUT_SIZE, STUB_INPUT_SIZE)?.value();
        let plane = STUB_INPUT_SIZE * STUB_INPUT_SIZE;
        let mut gray = vec![0.0f32; plane];
        for chunk in small.data().chunks(plane) {
            for (g, &v) in gray.iter_mut().zip(chunk) {
                *g += v / c as f32;
            }
        }
        let mut v: Vec<f32> = self
            .projection
            .chunks(plane)
            .map(|row| row.iter().zip(&gray).map(|(a, b)| a * b).sum())
            .collect();
        let norm = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// Embeddings of many images as an `[N, d]` tensor.
pub fn embed_batch(provider: &dyn EmbeddingProvider, images: &[&Image]) -> Result<Tensor<f32>> {
    let mut data = Vec::with_capacity(images.len() * provider.dim());
    for img in images {
        let v = provider.embed(img)?;
        if v.len() != provider.dim() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "embedding provider returned {} values (expected {}) or non-finite output",
                v.len(),
                provider.dim()
            )));
        }
        data.extend(v);
    }
    Tensor::new(&[images.len(), provider.dim()], data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_length_and_reproducible() {
        let p = StubProvider::new(64, 3).unwrap();
        let mut img = Image::zeros(1, 64, 64);
        img.set(0, 10, 20, 1.0);
        img.set(0, 40, 33, 1.0);
        let a = p.embed(&img).unwrap();
        assert_eq!(a.len(), 64);
        let norm: f32 = a.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-5);
        assert_eq!(a, StubProvider::new(64, 3).unwrap().embed(&img).unwrap());
    }
}
