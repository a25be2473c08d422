//! Procedural talking-head clips: a gradient background, an elliptical head
//! and a mouth whose opening follows a smooth random signal.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::clip::FrameClip;
use super::frame::Image;
use super::landmarks::LandmarkSet;
use crate::error::{Error, Result};

pub const MOUTH_LANDMARKS: usize = 20;
pub const HEAD_LANDMARKS: usize = 8;
pub const TOY_LANDMARKS: usize = MOUTH_LANDMARKS + HEAD_LANDMARKS;
pub const TOY_FRAME_RATE: f64 = 25.0;
pub const MIN_TOY_RESOLUTION: usize = 32;

/// Range of the mouth's vertical radius, as a fraction of the image height.
pub const MOUTH_OPENING_RANGE: (f64, f64) = (0.02, 0.12);

type Rgb = [f64; 3];

/// Everything about a clip that stays fixed over time.
#[derive(Clone, Debug)]
struct Scene {
    bg_from: Rgb,
    bg_to: Rgb,
    bg_dir: (f64, f64),
    skin: Rgb,
    lips: Rgb,
    head_center: (f64, f64),
    head_radii: (f64, f64),
    mouth_half_width: f64,
    /// (frequency in Hz, phase, amplitude) of the components of the opening signal.
    components: Vec<(f64, f64, f64)>,
}

const EYE: Rgb = [0.12, 0.10, 0.10];
const MOUTH_INTERIOR: Rgb = [0.30, 0.04, 0.07];

fn color(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Rgb {
    [rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi)]
}

impl Scene {
    fn sample(rng: &mut ChaCha8Rng) -> Self {
        let angle = rng.random_range(0.0..TAU);
        let skin = [
            rng.random_range(0.55..0.9),
            rng.random_range(0.4..0.7),
            rng.random_range(0.3..0.55),
        ];
        let head_radii = (rng.random_range(0.26..0.32), rng.random_range(0.32..0.38));
        let components = (0..3)
            .map(|_| {
                (
                    rng.random_range(0.4..2.5),
                    rng.random_range(0.0..TAU),
                    rng.random_range(0.5..1.0),
                )
            })
            .collect();
        Scene {
            bg_from: color(rng, 0.1, 0.5),
            bg_to: color(rng, 0.5, 0.95),
            bg_dir: (angle.cos(), angle.sin()),
            skin,
            lips: [skin[0] * 0.85, skin[1] * 0.45, skin[2] * 0.5],
            head_center: (rng.random_range(0.44..0.56), rng.random_range(0.44..0.56)),
            head_radii,
            mouth_half_width: 0.4 * head_radii.0,
            components,
        }
    }

    /// Mouth vertical radius at time `t` seconds, within [`MOUTH_OPENING_RANGE`].
    fn opening(&self, t: f64) -> f64 {
        let total: f64 = self.components.iter().map(|c| c.2).sum();
        let s: f64 = self
            .components
            .iter()
            .map(|&(f, phase, amp)| amp * (TAU * f * t + phase).sin())
            .sum();
        let unit = (0.5 + 0.5 * s / total).clamp(0.0, 1.0);
        let (lo, hi) = MOUTH_OPENING_RANGE;
        lo + (hi - lo) * unit
    }

    fn mouth_center(&self) -> (f64, f64) {
        (self.head_center.0, self.head_center.1 + 0.45 * self.head_radii.1)
    }

    fn landmarks(&self, opening: f64) -> LandmarkSet {
        let (mx, my) = self.mouth_center();
        let (hx, hy) = self.head_center;
        let mouth = (0..MOUTH_LANDMARKS).map(|k| {
            let a = TAU * k as f64 / MOUTH_LANDMARKS as f64;
            (mx + self.mouth_half_width * a.cos(), my + opening * a.sin())
        });
        let head = (0..HEAD_LANDMARKS).map(|k| {
            let a = TAU * k as f64 / HEAD_LANDMARKS as f64;
            (hx + self.head_radii.0 * a.cos(), hy + self.head_radii.1 * a.sin())
        });
        LandmarkSet::new(mouth.chain(head).collect()).expect("toy landmarks stay inside the frame")
    }

    fn render(&self, resolution: usize, opening: f64) -> Image {
        let scale = (resolution - 1) as f64;
        let px = |v: f64| v * scale;
        let (hx, hy) = (px(self.head_center.0), px(self.head_center.1));
        let (hrx, hry) = (px(self.head_radii.0), px(self.head_radii.1));
        let (mx, my) = (px(self.mouth_center().0), px(self.mouth_center().1));
        let (mrx, mry) = (px(self.mouth_half_width), px(opening));
        let lip = 0.02 * scale;
        let eye_r = 0.045 * scale;
        let eyes = [
            (hx - 0.38 * hrx, hy - 0.22 * hry),
            (hx + 0.38 * hrx, hy - 0.22 * hry),
        ];

        let mut img = Image::zeros(3, resolution, resolution);
        for row in 0..resolution {
            for col in 0..resolution {
                let (x, y) = (col as f64, row as f64);
                let u = x / scale - 0.5;
                let v = y / scale - 0.5;
                let t = (0.5 + (u * self.bg_dir.0 + v * self.bg_dir.1) / 1.42).clamp(0.0, 1.0);
                let mut rgb = lerp(self.bg_from, self.bg_to, t);
                rgb = lerp(rgb, self.skin, coverage(x - hx, y - hy, hrx, hry));
                for &(ex, ey) in &eyes {
                    rgb = lerp(rgb, EYE, coverage(x - ex, y - ey, eye_r, eye_r));
                }
                rgb = lerp(rgb, self.lips, coverage(x - mx, y - my, mrx + lip, mry + lip));
                rgb = lerp(rgb, MOUTH_INTERIOR, coverage(x - mx, y - my, mrx, mry));
                for (c, &value) in rgb.iter().enumerate() {
                    img.set(c, row, col, value as f32);
                }
            }
        }
        img
    }
}

fn lerp(a: Rgb, b: Rgb, t: f64) -> Rgb {
    [
        a[0] + (b[0] - a[0]) * t,
        a[1] + (b[1] - a[1]) * t,
        a[2] + (b[2] - a[2]) * t,
    ]
}

/// Anti-aliased ellipse coverage from a first-order signed-distance estimate (pixels).
fn coverage(dx: f64, dy: f64, rx: f64, ry: f64) -> f64 {
    let f = (dx / rx).powi(2) + (dy / ry).powi(2) - 1.0;
    let grad = 2.0 * ((dx / (rx * rx)).powi(2) + (dy / (ry * ry)).powi(2)).sqrt();
    if grad < 1e-12 {
        return if f < 0.0 { 1.0 } else { 0.0 };
    }
    (0.5 - f / grad).clamp(0.0, 1.0)
}

fn clip_rng(seed: u64, clip: usize) -> ChaCha8Rng {
    let mut h = seed ^ 0x5bd1_e995_u64.wrapping_mul(clip as u64 + 1);
    h = (h ^ (h >> 33)).wrapping_mul(0xff51_afd7_ed55_8ccd);
    h = (h ^ (h >> 33)).wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    ChaCha8Rng::seed_from_u64(h ^ (h >> 33))
}

/// Synthesizes `num_clips` deterministic clips of `frames_per_clip` square
/// frames at `resolution` pixels, each with [`TOY_LANDMARKS`] landmarks per frame
/// (20 on the mouth contour followed by 8 on the head outline).
pub fn make_toy_dataset(
    seed: u64,
    num_clips: usize,
    frames_per_clip: usize,
    resolution: usize,
) -> Result<Vec<FrameClip>> {
    if resolution < MIN_TOY_RESOLUTION {
        return Err(Error::invalid(format!(
            "toy resolution {resolution} is below {MIN_TOY_RESOLUTION}; the 25x25 density kernel would not fit"
        )));
    }
    if frames_per_clip < super::clip::MIN_CLIP_LEN {
        return Err(Error::invalid(format!(
            "clips need at least {} frames, got {frames_per_clip}",
            super::clip::MIN_CLIP_LEN
        )));
    }
    (0..num_clips)
        .map(|c| {
            let scene = Scene::sample(&mut clip_rng(seed, c));
            let (frames, landmarks) = (0..frames_per_clip)
                .map(|i| {
                    let opening = scene.opening(i as f64 / TOY_FRAME_RATE);
                    (scene.render(resolution, opening), scene.landmarks(opening))
                })
                .unzip();
            FrameClip::new(super::clip::clip_dir_name(c), frames, landmarks, TOY_FRAME_RATE)
        })
        .collect()
}

/// The mouth-opening signal of toy clip `clip`, one value per frame.
pub fn toy_mouth_openings(seed: u64, clip: usize, frames: usize) -> Vec<f64> {
    let scene = Scene::sample(&mut clip_rng(seed, clip));
    (0..frames)
        .map(|i| scene.opening(i as f64 / TOY_FRAME_RATE))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_contract() {
        let clips = make_toy_dataset(0, 1, 30, 64).unwrap();
        assert_eq!(clips.len(), 1);
        let clip = &clips[0];
        assert_eq!(clip.len(), 30);
        for (f, l) in clip.frames().iter().zip(clip.landmarks()) {
            assert_eq!((f.channels(), f.height(), f.width()), (3, 64, 64));
            assert_eq!(l.len(), 28);
            assert!(f.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = make_toy_dataset(3, 2, 8, 32).unwrap();
        let b = make_toy_dataset(3, 2, 8, 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = make_toy_dataset(0, 1, 7, 64).unwrap();
        let b = make_toy_dataset(1, 1, 7, 64).unwrap();
        let diff = a[0].frames()[0].mean_abs_diff(&b[0].frames()[0]);
        assert!(diff > 0.0, "mean abs diff {diff}");
    }

    #[test]
    fn mouth_opening_stays_in_range_and_moves() {
        let openings = toy_mouth_openings(5, 0, 200);
        let (lo, hi) = MOUTH_OPENING_RANGE;
        assert!(openings.iter().all(|&a| (lo..=hi).contains(&a)));
        let spread = openings.iter().cloned().fold(f64::MIN, f64::max)
            - openings.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread > 0.03, "opening barely moves: {spread}");
    }

    #[test]
    fn rejects_small_resolution_and_short_clips() {
        assert!(make_toy_dataset(0, 1, 30, 31).is_err());
        assert!(make_toy_dataset(0, 1, 6, 64).is_err());
    }
}
