use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Element, Tensor};

/// A planar (channel-major) image with `f32` samples, nominally in `[0, 1]`.
#[derive(Clone, PartialEq)]
pub struct Image {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl std::fmt::Debug for Image {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Image({}x{}x{})", self.channels, self.height, self.width)
    }
}

impl Image {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::shape(
                "Image::new",
                format!(
                    "{channels}x{height}x{width} needs {} samples, got {}",
                    channels * height * width,
                    data.len()
                ),
            ));
        }
        Ok(Image {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Image {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        (self.channels, self.height, self.width) == (other.channels, other.height, other.width)
    }

    /// `[C, H, W]` tensor view of the samples.
    pub fn to_tensor<E: Element>(&self) -> Tensor<E> {
        Tensor::new(
            &[self.channels, self.height, self.width],
            self.data.iter().map(|&v| E::from_f64(v as f64)).collect(),
        )
        .expect("image dimensions")
    }

    /// Builds an image from a `[C, H, W]` or `[1, C, H, W]` tensor.
    pub fn from_tensor<E: Element>(t: &Tensor<E>) -> Result<Self> {
        let (c, h, w) = match t.shape() {
            &[c, h, w] | &[1, c, h, w] => (c, h, w),
            s => {
                return Err(Error::shape(
                    "Image::from_tensor",
                    format!("expected [C,H,W] or [1,C,H,W], got {s:?}"),
                ))
            }
        };
        Image::new(c, h, w, t.data().iter().map(|v| v.into_f64() as f32).collect())
    }

    pub fn mean_abs_diff(&self, other: &Image) -> f64 {
        assert!(self.same_shape(other), "mean_abs_diff shapes");
        let total: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum();
        total / self.data.len().max(1) as f64
    }

    /// Writes an 8-bit PNG (grayscale for one channel, RGB for three).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let quantize = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let plane = self.height * self.width;
        match self.channels {
            1 => {
                let buf: Vec<u8> = self.data.iter().map(|&v| quantize(v)).collect();
                image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
                    .expect("buffer size")
                    .save(path)?;
            }
            3 => {
                let mut buf = Vec::with_capacity(plane * 3);
                for i in 0..plane {
                    for c in 0..3 {
                        buf.push(quantize(self.data[c * plane + i]));
                    }
                }
                image::RgbImage::from_raw(self.width as u32, self.height as u32, buf)
                    .expect("buffer size")
                    .save(path)?;
            }
            c => {
                return Err(Error::invalid(format!(
                    "cannot encode a {c}-channel image as PNG"
                )))
            }
        }
        Ok(())
    }

    /// Reads any 8- or 16-bit PNG as a three-channel image in `[0, 1]`.
    pub fn load_rgb(path: &Path) -> Result<Self> {
        let img = image::open(path)?.to_rgb32f();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let plane = w * h;
        let mut data = vec![0.0; plane * 3];
        for (i, px) in img.pixels().enumerate() {
            for c in 0..3 {
                data[c * plane + i] = px.0[c];
            }
        }
        Image::new(3, h, w, data)
    }
}
