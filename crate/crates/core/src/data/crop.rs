use super::clip::FrameClip;
use super::frame::Image;
use super::landmarks::LandmarkSet;
use crate::error::{Error, Result};

/// Top-left corner of a `size`-long crop along a `dim`-long axis whose center
/// sits as close as possible to normalized coordinate `center`.
fn crop_start(center: f64, dim: usize, size: usize) -> usize {
    let ideal = center.clamp(0.0, 1.0) * (dim - 1) as f64 - (size - 1) as f64 / 2.0;
    (ideal.round().max(0.0) as usize).min(dim - size)
}

/// `size x size` crop centered on `center` (normalized `(x, y)`), or on the
/// image center when `None`. The window is shifted inward near borders.
pub fn center_crop(image: &Image, size: usize, center: Option<(f64, f64)>) -> Result<Image> {
    let (h, w) = (image.height(), image.width());
    if size == 0 || size > h.min(w) {
        return Err(Error::invalid(format!(
            "cannot take a {size}x{size} crop from a {h}x{w} image"
        )));
    }
    let (cx, cy) = center.unwrap_or((0.5, 0.5));
    let (top, left) = (crop_start(cy, h, size), crop_start(cx, w, size));
    let mut out = Image::zeros(image.channels(), size, size);
    for c in 0..image.channels() {
        for y in 0..size {
            for x in 0..size {
                out.set(c, y, x, image.get(c, top + y, left + x));
            }
        }
    }
    Ok(out)
}

/// Mean bounding-box center of the clip's landmarks, if it has any.
pub fn face_center(clip: &FrameClip) -> Option<(f64, f64)> {
    let centers: Vec<(f64, f64)> = clip.landmarks().iter().filter_map(|l| l.bbox_center()).collect();
    if centers.is_empty() {
        return None;
    }
    let n = centers.len() as f64;
    Some((
        centers.iter().map(|c| c.0).sum::<f64>() / n,
        centers.iter().map(|c| c.1).sum::<f64>() / n,
    ))
}

/// Crops every frame of a clip with one fixed window around the face and
/// re-expresses landmarks in the cropped frame. Landmarks that fall outside
/// the crop are clamped to its border.
pub fn crop_clip(clip: &FrameClip, size: usize) -> Result<FrameClip> {
    let (h, w) = (clip.height(), clip.width());
    if size == h && size == w {
        return Ok(clip.clone());
    }
    let center = face_center(clip);
    let (cx, cy) = center.unwrap_or((0.5, 0.5));
    if size == 0 || size > h.min(w) {
        return Err(Error::invalid(format!(
            "cannot take a {size}x{size} crop from {h}x{w} frames"
        )));
    }
    let (top, left) = (crop_start(cy, h, size) as f64, crop_start(cx, w, size) as f64);
    let frames = clip
        .frames()
        .iter()
        .map(|f| center_crop(f, size, center))
        .collect::<Result<Vec<_>>>()?;
    let scale = (size - 1).max(1) as f64;
    let landmarks = clip
        .landmarks()
        .iter()
        .map(|l| {
            let points = l
                .points()
                .iter()
                .map(|&(x, y)| {
                    let nx = (x * (w - 1) as f64 - left) / scale;
                    let ny = (y * (h - 1) as f64 - top) / scale;
                    (nx.clamp(0.0, 1.0), ny.clamp(0.0, 1.0))
                })
                .collect();
            LandmarkSet::new(points)
        })
        .collect::<Result<Vec<_>>>()?;
    FrameClip::new(clip.name.clone(), frames, landmarks, clip.frame_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::landmarks::rasterize_landmarks;
    use crate::data::toy::make_toy_dataset;

    fn ramp(h: usize, w: usize) -> Image {
        let data = (0..h * w).map(|i| i as f32).collect();
        Image::new(1, h, w, data).unwrap()
    }

    #[test]
    fn hd_frame_to_224() {
        let img = Image::zeros(3, 720, 1280);
        let out = center_crop(&img, 224, None).unwrap();
        assert_eq!((out.channels(), out.height(), out.width()), (3, 224, 224));
    }

    #[test]
    fn full_size_crop_is_identity() {
        let img = ramp(16, 16);
        assert_eq!(center_crop(&img, 16, None).unwrap(), img);
    }

    #[test]
    fn toy_crop_keeps_rows_8_to_55() {
        let img = ramp(64, 64);
        let out = center_crop(&img, 48, None).unwrap();
        for y in 0..48 {
            for x in 0..48 {
                assert_eq!(out.get(0, y, x), img.get(0, y + 8, x + 8));
            }
        }
    }

    #[test]
    fn oversized_crop_is_rejected() {
        assert!(center_crop(&ramp(10, 20), 11, None).is_err());
    }

    #[test]
    fn off_center_faces_shift_the_window_inside_the_image() {
        let img = ramp(64, 64);
        let out = center_crop(&img, 32, Some((0.0, 1.0))).unwrap();
        // Pinned to the bottom-left corner.
        assert_eq!(out.get(0, 0, 0), img.get(0, 32, 0));
    }

    #[test]
    fn cropped_landmarks_follow_the_pixels() {
        let clip = &make_toy_dataset(4, 1, 7, 64).unwrap()[0];
        let cropped = crop_clip(clip, 48).unwrap();
        let center = face_center(clip).unwrap();
        let full = rasterize_landmarks(&clip.landmarks()[0], 64, 64).unwrap();
        let expected = center_crop(&full, 48, Some(center)).unwrap();
        let got = rasterize_landmarks(&cropped.landmarks()[0], 48, 48).unwrap();
        assert_eq!(got, expected);
    }
}
