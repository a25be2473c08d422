use super::frame::Image;
use crate::error::{Error, Result};

/// Facial landmark coordinates for one frame, normalized to `[0, 1]²`
/// (`x` along the width, `y` along the height).
#[derive(Clone, Debug, PartialEq, Default)]
pub struct LandmarkSet {
    points: Vec<(f64, f64)>,
}

impl LandmarkSet {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(x, y)) in points.iter().enumerate() {
            if !(x.is_finite() && y.is_finite()) || !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
                return Err(Error::invalid(format!(
                    "landmark {i} at ({x}, {y}) is outside the unit square"
                )));
            }
        }
        Ok(LandmarkSet { points })
    }

    pub fn empty() -> Self {
        LandmarkSet { points: Vec::new() }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Center of the bounding box, or `None` for an empty set.
    pub fn bbox_center(&self) -> Option<(f64, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let (mut x0, mut y0, mut x1, mut y1) = (1.0f64, 1.0f64, 0.0f64, 0.0f64);
        for &(x, y) in &self.points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        Some(((x0 + x1) / 2.0, (y0 + y1) / 2.0))
    }

    /// Pixel `(row, col)` each landmark lands on in a `height × width` grid.
    pub fn pixel_positions(&self, height: usize, width: usize) -> Vec<(usize, usize)> {
        self.points
            .iter()
            .map(|&(x, y)| (snap(y, height), snap(x, width)))
            .collect()
    }
}

/// Nearest pixel of a normalized coordinate: `round(c · (dim − 1))`, clamped.
pub fn snap(coord: f64, dim: usize) -> usize {
    let c = if coord.is_finite() { coord.clamp(0.0, 1.0) } else { 0.0 };
    (c * (dim.saturating_sub(1)) as f64).round() as usize
}

/// Binary dot image: `1.0` at every landmark pixel, `0.0` elsewhere.
pub fn rasterize_landmarks(landmarks: &LandmarkSet, height: usize, width: usize) -> Result<Image> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "cannot rasterize into a {height}x{width} image"
        )));
    }
    let mut img = Image::zeros(1, height, width);
    for (row, col) in landmarks.pixel_positions(height, width) {
        img.set(0, row, col, 1.0);
    }
    Ok(img)
}
