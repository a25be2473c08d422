use std::fs;
use std::path::{Path, PathBuf};

use super::frame::Image;
use super::landmarks::LandmarkSet;
use crate::error::{Error, Result};

/// Shortest clip a seven-frame conditioning window fits in.
pub const MIN_CLIP_LEN: usize = 7;

/// Frame rate assumed for clips read from disk; the directory layout does not record one.
pub const DEFAULT_FRAME_RATE: f64 = 25.0;

/// An ordered run of RGB frames with one landmark set per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameClip {
    pub name: String,
    frames: Vec<Image>,
    landmarks: Vec<LandmarkSet>,
    pub frame_rate: f64,
}

impl FrameClip {
    pub fn new(
        name: impl Into<String>,
        frames: Vec<Image>,
        landmarks: Vec<LandmarkSet>,
        frame_rate: f64,
    ) -> Result<Self> {
        Self::build(name.into(), frames, landmarks, frame_rate, MIN_CLIP_LEN)
    }

    /// A model's output: any non-empty length is allowed, since generation
    /// trims the window radius off both ends of the driving track.
    pub fn generated(
        name: impl Into<String>,
        frames: Vec<Image>,
        landmarks: Vec<LandmarkSet>,
        frame_rate: f64,
    ) -> Result<Self> {
        Self::build(name.into(), frames, landmarks, frame_rate, 1)
    }

    fn build(
        name: String,
        frames: Vec<Image>,
        landmarks: Vec<LandmarkSet>,
        frame_rate: f64,
        min_len: usize,
    ) -> Result<Self> {
        if frames.len() != landmarks.len() {
            return Err(Error::invalid(format!(
                "clip {name}: {} frames but {} landmark sets",
                frames.len(),
                landmarks.len()
            )));
        }
        if frames.len() < min_len {
            return Err(Error::invalid(format!(
                "clip {name}: {} frames, need at least {min_len}",
                frames.len()
            )));
        }
        let first = &frames[0];
        if first.channels() != 3 {
            return Err(Error::invalid(format!("clip {name}: frames must be RGB")));
        }
        if let Some(i) = frames.iter().position(|f| !f.same_shape(first)) {
            return Err(Error::invalid(format!(
                "clip {name}: frame {i} is {:?}, frame 0 is {:?}",
                frames[i], first
            )));
        }
        let n = landmarks[0].len();
        if let Some(i) = landmarks.iter().position(|l| l.len() != n) {
            return Err(Error::invalid(format!(
                "clip {name}: frame {i} has {} landmarks, frame 0 has {n}",
                landmarks[i].len()
            )));
        }
        Ok(FrameClip {
            name,
            frames,
            landmarks,
            frame_rate,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Image] {
        &self.frames
    }

    pub fn landmarks(&self) -> &[LandmarkSet] {
        &self.landmarks
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn landmarks_per_frame(&self) -> usize {
        self.landmarks[0].len()
    }

    /// Writes `frame_%05d.png` files and `landmarks.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, frame) in self.frames.iter().enumerate() {
            frame.save_png(&dir.join(format!("frame_{i:05}.png")))?;
        }
        write_landmarks_csv(&dir.join("landmarks.csv"), &self.landmarks)
    }

    /// Reads a clip directory written by [`FrameClip::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let landmarks = read_landmarks_csv(&dir.join("landmarks.csv"))?;
        let mut frames = Vec::with_capacity(landmarks.len());
        for i in 0..landmarks.len() {
            frames.push(Image::load_rgb(&dir.join(format!("frame_{i:05}.png")))?);
        }
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        FrameClip::new(name, frames, landmarks, DEFAULT_FRAME_RATE)
    }
}

/// One row per frame: the frame index, then `x1, y1, x2, y2, ...`. No header.
pub fn write_landmarks_csv(path: &Path, track: &[LandmarkSet]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    for (i, lms) in track.iter().enumerate() {
        let mut row = vec![i.to_string()];
        for &(x, y) in lms.points() {
            row.push(x.to_string());
            row.push(y.to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_landmarks_csv(path: &Path) -> Result<Vec<LandmarkSet>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<(usize, LandmarkSet)> = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let bad = |what: &str| {
            Error::invalid(format!("{}:{}: {what}", path.display(), line + 1))
        };
        let mut fields = record.iter();
        let index: usize = fields
            .next()
            .ok_or_else(|| bad("empty row"))?
            .parse()
            .map_err(|_| bad("frame index is not an integer"))?;
        let coords: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("coordinate is not a number"))?;
        if coords.len() % 2 != 0 {
            return Err(bad("odd number of coordinates"));
        }
        let points = coords.chunks(2).map(|p| (p[0], p[1])).collect();
        rows.push((index, LandmarkSet::new(points)?));
    }
    rows.sort_by_key(|(i, _)| *i);
    for (expected, (i, _)) in rows.iter().enumerate() {
        if *i != expected {
            return Err(Error::invalid(format!(
                "{}: frame indices must run 0..{} without gaps (found {i})",
                path.display(),
                rows.len()
            )));
        }
    }
    Ok(rows.into_iter().map(|(_, l)| l).collect())
}

/// Directory name of clip `index` under a dataset root.
pub fn clip_dir_name(index: usize) -> String {
    format!("clip_{index:04}")
}

/// Writes clips as `root/clip_####/`.
pub fn write_dataset(root: &Path, clips: &[FrameClip]) -> Result<Vec<PathBuf>> {
    clips
        .iter()
        .enumerate()
        .map(|(i, clip)| {
            let dir = root.join(clip_dir_name(i));
            clip.write_dir(&dir)?;
            Ok(dir)
        })
        .collect()
}

/// Reads every `clip_*` directory under `root`, in name order.
pub fn read_dataset(root: &Path) -> Result<Vec<FrameClip>> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .is_some_and(|n| n.to_string_lossy().starts_with("clip_"))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::invalid(format!(
            "{} contains no clip_* directories",
            root.display()
        )));
    }
    dirs.iter().map(|d| FrameClip::read_dir(d)).collect()
}

/// Splits clips into (train, test) by clip: the first `ceil(fraction · n)`
/// clips train, the rest test.
pub fn split_clips(clips: &[FrameClip], train_fraction: f64) -> (Vec<FrameClip>, Vec<FrameClip>) {
    let n = clips.len();
    let n_train = ((train_fraction * n as f64).ceil() as usize).clamp(n.min(1), n);
    (clips[..n_train].to_vec(), clips[n_train..].to_vec())
}
