use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::data::LandmarkSet;
use crate::error::{Error, Result};
use crate::nn::{Element, Tensor};

pub const DEFAULT_KERNEL_SIZE: usize = 25;
pub const DEFAULT_KERNEL_SIGMA: f64 = 5.0;

/// A normalized, isotropic Gaussian stamp.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    size: usize,
    sigma: f64,
    weights: Vec<f64>,
}

impl GaussianKernel {
    pub fn new(size: usize, sigma: f64) -> Result<Self> {
        if size == 0 || size % 2 == 0 {
            return Err(Error::invalid(format!(
                "kernel size must be odd and positive, got {size}"
            )));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("kernel sigma must be positive, got {sigma}")));
        }
        let c = (size / 2) as f64;
        let mut weights: Vec<f64> = (0..size * size)
            .map(|k| {
                let (i, j) = ((k / size) as f64, (k % size) as f64);
                (-((i - c).powi(2) + (j - c).powi(2)) / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(GaussianKernel {
            size,
            sigma,
            weights,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.size + col]
    }
}

impl Default for GaussianKernel {
    fn default() -> Self {
        GaussianKernel::new(DEFAULT_KERNEL_SIZE, DEFAULT_KERNEL_SIGMA).expect("default kernel")
    }
}

pub fn build_gaussian_kernel(size: usize, sigma: f64) -> Result<GaussianKernel> {
    GaussianKernel::new(size, sigma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapSource {
    GroundTruth,
    Predicted,
}

/// A non-negative density grid over image pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
    pub source: MapSource,
}

impl ProbabilityMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>, source: MapSource) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(
                "ProbabilityMap::new",
                format!("{height}x{width} needs {} values, got {}", height * width, data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "probability maps are finite and non-negative, found {v}"
            )));
        }
        Ok(ProbabilityMap {
            height,
            width,
            data,
            source,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(0.0, f64::max)
    }

    /// `[1, 1, H, W]` tensor.
    pub fn to_tensor<E: Element>(&self) -> Tensor<E> {
        Tensor::new(
            &[1, 1, self.height, self.width],
            self.data.iter().map(|&v| E::from_f64(v)).collect(),
        )
        .expect("map dimensions")
    }

    /// Reads a single-sample, single-channel tensor (`[H, W]`, `[1, H, W]` or `[1, 1, H, W]`).
    pub fn from_tensor<E: Element>(t: &Tensor<E>, source: MapSource) -> Result<Self> {
        let (h, w) = match t.shape() {
            &[h, w] | &[1, h, w] | &[1, 1, h, w] => (h, w),
            s => {
                return Err(Error::shape(
                    "ProbabilityMap::from_tensor",
                    format!("expected one single-channel map, got {s:?}"),
                ))
            }
        };
        ProbabilityMap::new(h, w, t.data().iter().map(|v| v.into_f64()).collect(), source)
    }

    /// 16-bit grayscale PNG, linearly scaled so the maximum maps to 65535. The
    /// scale is recorded in a `max` text chunk.
    pub fn save_png16(&self, path: &Path) -> Result<()> {
        let max = self.max();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut encoder = png::Encoder::new(BufWriter::new(file), self.width as u32, self.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Sixteen);
        let png_err = |e: png::EncodingError| Error::invalid(format!("{}: {e}", path.display()));
        encoder
            .add_text_chunk("max".to_string(), format!("{max:e}"))
            .map_err(png_err)?;
        let mut bytes = Vec::with_capacity(self.data.len() * 2);
        for &v in &self.data {
            let q = if max > 0.0 {
                (v / max * 65535.0).round() as u16
            } else {
                0
            };
            bytes.extend_from_slice(&q.to_be_bytes());
        }
        let mut writer = encoder.write_header().map_err(png_err)?;
        writer.write_image_data(&bytes).map_err(png_err)?;
        writer.finish().map_err(png_err)
    }

    /// Reads a map written by [`ProbabilityMap::save_png16`].
    pub fn load_png16(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let bad = |what: String| Error::invalid(format!("{}: {what}", path.display()));
        let mut reader = png::Decoder::new(BufReader::new(file))
            .read_info()
            .map_err(|e| bad(e.to_string()))?;
        let info = reader.info();
        if (info.color_type, info.bit_depth) != (png::ColorType::Grayscale, png::BitDepth::Sixteen) {
            return Err(bad("not a 16-bit grayscale PNG".into()));
        }
        let max: f64 = info
            .uncompressed_latin1_text
            .iter()
            .find(|c| c.keyword == "max")
            .ok_or_else(|| bad("missing `max` text chunk".into()))?
            .text
            .parse()
            .map_err(|_| bad("unreadable `max` text chunk".into()))?;
        let (w, h) = (info.width as usize, info.height as usize);
        let mut buf = vec![0; reader.output_buffer_size().unwrap_or(w * h * 2)];
        reader.next_frame(&mut buf).map_err(|e| bad(e.to_string()))?;
        let data = buf[..w * h * 2]
            .chunks(2)
            .map(|b| u16::from_be_bytes([b[0], b[1]]) as f64 / 65535.0 * max)
            .collect();
        ProbabilityMap::new(h, w, data, MapSource::GroundTruth)
    }
}

/// Zero-padded convolution of the landmark dot image with `kernel`.
pub fn make_probability_map(
    landmarks: &LandmarkSet,
    height: usize,
    width: usize,
    kernel: &GaussianKernel,
) -> Result<ProbabilityMap> {
    if kernel.size() > height.min(width) {
        return Err(Error::invalid(format!(
            "a {0}x{0} kernel does not fit a {height}x{width} map",
            kernel.size()
        )));
    }
    let mut dots = landmarks.pixel_positions(height, width);
    // The dot image is binary: landmarks on the same pixel count once.
    dots.sort_unstable();
    dots.dedup();
    let r = kernel.radius() as isize;
    let mut data = vec![0.0; height * width];
    for (row, col) in dots {
        for ki in -r..=r {
            let y = row as isize + ki;
            if y < 0 || y >= height as isize {
                continue;
            }
            for kj in -r..=r {
                let x = col as isize + kj;
                if x < 0 || x >= width as isize {
                    continue;
                }
                data[y as usize * width + x as usize] += kernel.get((ki + r) as usize, (kj + r) as usize);
            }
        }
    }
    ProbabilityMap::new(height, width, data, MapSource::GroundTruth)
}
