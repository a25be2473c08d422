use super::clip::FrameClip;
use super::frame::Image;
use super::landmarks::{rasterize_landmarks, LandmarkSet};
use crate::error::{Error, Result};
use crate::nn::{Element, Tensor};

/// Frames on each side of the target covered by a window.
pub const WINDOW_RADIUS: usize = 3;
pub const WINDOW_LEN: usize = 2 * WINDOW_RADIUS + 1;
/// RGB frames preceding the target that can ride along in a window.
pub const PRIOR_FRAMES: usize = 3;
/// Input channels the prior frames add.
pub const PRIOR_FRAMES_CHANNELS: usize = 3 * PRIOR_FRAMES;

/// Generator input for one target frame: the landmark dot images of frames
/// `t-3 ..= t+3` and, optionally, the three RGB frames before `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditioningWindow {
    landmark_images: Vec<Image>,
    frame_indices: Vec<usize>,
    prior_rgb: Option<Vec<Image>>,
}

impl ConditioningWindow {
    /// Builds a window centered on `t` from a landmark track. `prior_rgb`, when
    /// present, must hold the three frames before `t` in temporal order.
    pub fn from_track(
        track: &[LandmarkSet],
        t: usize,
        height: usize,
        width: usize,
        prior_rgb: Option<Vec<Image>>,
    ) -> Result<Self> {
        if t < WINDOW_RADIUS || t + WINDOW_RADIUS >= track.len() {
            return Err(Error::invalid(format!(
                "window center {t} needs {WINDOW_RADIUS} frames on each side; the track has {} frames",
                track.len()
            )));
        }
        let frame_indices: Vec<usize> = (t - WINDOW_RADIUS..=t + WINDOW_RADIUS).collect();
        let landmark_images = frame_indices
            .iter()
            .map(|&i| rasterize_landmarks(&track[i], height, width))
            .collect::<Result<_>>()?;
        let window = ConditioningWindow {
            landmark_images,
            frame_indices,
            prior_rgb: None,
        };
        match prior_rgb {
            Some(frames) => window.with_prior(frames),
            None => Ok(window),
        }
    }

    /// Attaches prior RGB frames (ground truth or previously generated ones).
    pub fn with_prior(mut self, frames: Vec<Image>) -> Result<Self> {
        if frames.len() != PRIOR_FRAMES {
            return Err(Error::invalid(format!(
                "expected {PRIOR_FRAMES} prior frames, got {}",
                frames.len()
            )));
        }
        let (h, w) = (self.height(), self.width());
        if let Some(f) = frames
            .iter()
            .find(|f| (f.channels(), f.height(), f.width()) != (3, h, w))
        {
            return Err(Error::shape(
                "ConditioningWindow::with_prior",
                format!("prior frame {f:?} does not match a {h}x{w} window"),
            ));
        }
        self.prior_rgb = Some(frames);
        Ok(self)
    }

    pub fn landmark_images(&self) -> &[Image] {
        &self.landmark_images
    }

    /// Clip frame index of each landmark image.
    pub fn frame_indices(&self) -> &[usize] {
        &self.frame_indices
    }

    /// Position of the target frame inside the window.
    pub fn target_index(&self) -> usize {
        WINDOW_RADIUS
    }

    /// Clip frame index of the target.
    pub fn target_frame(&self) -> usize {
        self.frame_indices[WINDOW_RADIUS]
    }

    pub fn current_landmarks(&self) -> &Image {
        &self.landmark_images[WINDOW_RADIUS]
    }

    pub fn prior_rgb(&self) -> Option<&[Image]> {
        self.prior_rgb.as_deref()
    }

    pub fn height(&self) -> usize {
        self.landmark_images[0].height()
    }

    pub fn width(&self) -> usize {
        self.landmark_images[0].width()
    }

    /// Channel count of [`ConditioningWindow::to_tensor`]: 7, or 16 with priors.
    pub fn channels(&self) -> usize {
        WINDOW_LEN + if self.prior_rgb.is_some() { PRIOR_FRAMES_CHANNELS } else { 0 }
    }

    /// Landmark channels followed by prior RGB channels, as `[C, H, W]`.
    pub fn to_tensor<E: Element>(&self) -> Tensor<E> {
        let mut data = Vec::with_capacity(self.channels() * self.height() * self.width());
        let priors = self.prior_rgb.iter().flatten();
        for img in self.landmark_images.iter().chain(priors) {
            data.extend(img.data().iter().map(|&v| E::from_f64(v as f64)));
        }
        Tensor::new(&[self.channels(), self.height(), self.width()], data)
            .expect("window channel layout")
    }

    /// Only the landmark channels, as `[7, H, W]`.
    pub fn landmark_tensor<E: Element>(&self) -> Tensor<E> {
        let mut data = Vec::with_capacity(WINDOW_LEN * self.height() * self.width());
        for img in &self.landmark_images {
            data.extend(img.data().iter().map(|&v| E::from_f64(v as f64)));
        }
        Tensor::new(&[WINDOW_LEN, self.height(), self.width()], data).expect("window layout")
    }
}

/// Window centered on frame `t` of `clip`. With `teacher_forcing` the ground
/// truth frames `t-3 .. t-1` are attached as priors.
pub fn build_window(clip: &FrameClip, t: usize, teacher_forcing: bool) -> Result<ConditioningWindow> {
    let prior = if teacher_forcing && t >= PRIOR_FRAMES {
        Some(clip.frames()[t - PRIOR_FRAMES..t].to_vec())
    } else {
        None
    };
    ConditioningWindow::from_track(clip.landmarks(), t, clip.height(), clip.width(), prior)
}

/// Frame indices that can be a window center in a clip of `len` frames.
pub fn window_centers(len: usize) -> std::ops::Range<usize> {
    WINDOW_RADIUS..len.saturating_sub(WINDOW_RADIUS).max(WINDOW_RADIUS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::toy::make_toy_dataset;

    #[test]
    fn first_valid_center() {
        let clip = &make_toy_dataset(0, 1, 30, 32).unwrap()[0];
        let w = build_window(clip, 3, false).unwrap();
        assert_eq!(w.frame_indices(), &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(w.target_index(), 3);
        assert!(w.prior_rgb().is_none());
        assert_eq!(w.channels(), 7);
    }

    #[test]
    fn out_of_range_centers_are_rejected() {
        let clip = &make_toy_dataset(0, 1, 30, 32).unwrap()[0];
        assert!(build_window(clip, 2, false).is_err());
        assert!(build_window(clip, 26, false).is_ok());
        assert!(build_window(clip, 27, false).is_err());
        assert_eq!(window_centers(30), 3..27);
    }

    #[test]
    fn teacher_forcing_attaches_ground_truth() {
        let clip = &make_toy_dataset(0, 1, 10, 32).unwrap()[0];
        let w = build_window(clip, 4, true).unwrap();
        let prior = w.prior_rgb().unwrap();
        assert_eq!(prior, &clip.frames()[1..4]);
        assert_eq!(w.channels(), 16);
        let t = w.to_tensor::<f32>();
        assert_eq!(t.shape(), &[16, 32, 32]);
        let plane = 32 * 32;
        assert_eq!(&t.data()[7 * plane..8 * plane], &clip.frames()[1].data()[..plane]);
    }

    #[test]
    fn neighbouring_windows_share_six_images() {
        let clip = &make_toy_dataset(2, 1, 20, 32).unwrap()[0];
        let a = build_window(clip, 8, false).unwrap();
        let b = build_window(clip, 9, false).unwrap();
        assert_eq!(&a.landmark_images()[1..], &b.landmark_images()[..6]);
    }
}
