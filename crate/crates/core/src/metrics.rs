//! Reconstruction metrics and corpus-level evaluation reports.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::data::{FrameClip, Image, WINDOW_RADIUS};
use crate::error::{Error, Result};

/// PSNR reported when the images are (numerically) identical.
pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check_same(op: &'static str, a: &Image, b: &Image) -> Result<()> {
    if !a.same_shape(b) {
        return Err(Error::shape(op, format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

/// `10·log10(max² / MSE)`, capped at [`PSNR_CAP_DB`] when `MSE < max²·1e−10`.
pub fn psnr(a: &Image, b: &Image, max_value: f64) -> Result<f64> {
    check_same("psnr", a, b)?;
    if !(max_value > 0.0) {
        return Err(Error::invalid(format!("psnr max_value must be positive, got {max_value}")));
    }
    let n = a.data().len().max(1) as f64;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum::<f64>()
        / n;
    let peak = max_value * max_value;
    if mse < peak * 1e-10 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_1d() -> [f64; SSIM_WINDOW] {
    let c = (SSIM_WINDOW / 2) as f64;
    let mut g = [0.0; SSIM_WINDOW];
    for (i, v) in g.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= total);
    g
}

/// Valid-mode separable Gaussian filtering of an `h x w` plane.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (ho, wo) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * wo];
    for y in 0..h {
        for x in 0..wo {
            rows[y * wo + x] = (0..SSIM_WINDOW).map(|k| g[k] * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ho * wo];
    for y in 0..ho {
        for x in 0..wo {
            out[y * wo + x] = (0..SSIM_WINDOW).map(|k| g[k] * rows[(y + k) * wo + x]).sum();
        }
    }
    out
}

/// Mean structural similarity with an 11x11 Gaussian window (σ = 1.5),
/// `K1 = 0.01`, `K2 = 0.03` and a dynamic range of 1, averaged over channels.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_same("ssim", a, b)?;
    let (c, h, w) = (a.channels(), a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {h}x{w}"
        )));
    }
    let g = gaussian_1d();
    let (c1, c2) = (SSIM_K1.powi(2), SSIM_K2.powi(2));
    let plane = h * w;
    let mut total = 0.0;
    for ch in 0..c {
        let x: Vec<f64> = a.data()[ch * plane..(ch + 1) * plane].iter().map(|&v| v as f64).collect();
        let y: Vec<f64> = b.data()[ch * plane..(ch + 1) * plane].iter().map(|&v| v as f64).collect();
        let prod = |p: &[f64], q: &[f64]| -> Vec<f64> { p.iter().zip(q).map(|(u, v)| u * v).collect() };
        let mx = filter_valid(&x, h, w, &g);
        let my = filter_valid(&y, h, w, &g);
        let mxx = filter_valid(&prod(&x, &x), h, w, &g);
        let myy = filter_valid(&prod(&y, &y), h, w, &g);
        let mxy = filter_valid(&prod(&x, &y), h, w, &g);
        let mut sum = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cov = mxy[i] - ux * uy;
            sum += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += sum / mx.len() as f64;
    }
    Ok(total / c as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Ssim,
    Psnr,
    Fvd,
    LseC,
    LseD,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Ssim, Metric::Psnr, Metric::Fvd, Metric::LseC, Metric::LseD];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Ssim => "SSIM",
            Metric::Psnr => "PSNR",
            Metric::Fvd => "FVD",
            Metric::LseC => "LSE-C",
            Metric::LseD => "LSE-D",
        }
    }

    /// Whether this crate computes the metric (the rest need pretrained video models).
    pub fn available(self) -> bool {
        matches!(self, Metric::Ssim | Metric::Psnr)
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ssim" => Ok(Metric::Ssim),
            "psnr" => Ok(Metric::Psnr),
            "fvd" => Ok(Metric::Fvd),
            "lse-c" | "lse_c" | "lsec" => Ok(Metric::LseC),
            "lse-d" | "lse_d" | "lsed" => Ok(Metric::LseD),
            other => Err(Error::invalid(format!(
                "unknown metric `{other}` (expected ssim, psnr, fvd, lse-c, lse-d)"
            ))),
        }
    }
}

/// Parses a comma-separated metric list, keeping the canonical column order.
pub fn parse_metrics(list: &str) -> Result<Vec<Metric>> {
    let mut metrics = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<Metric>>>()?;
    metrics.sort();
    metrics.dedup();
    if metrics.is_empty() {
        return Err(Error::invalid("no metrics selected"));
    }
    Ok(metrics)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClipMetrics {
    pub name: String,
    pub frames: usize,
    pub ssim: f64,
    pub psnr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub clips: Vec<ClipMetrics>,
    pub ssim: f64,
    pub psnr: f64,
    pub metrics: Vec<Metric>,
}

impl MetricReport {
    fn cell(&self, metric: Metric, ssim: f64, psnr: f64) -> String {
        match metric {
            Metric::Ssim => format!("{ssim:.4}"),
            Metric::Psnr => format!("{psnr:.2}"),
            _ => "n/a".into(),
        }
    }

    fn rows(&self) -> Vec<(String, Vec<String>)> {
        let mut rows: Vec<(String, Vec<String>)> = self
            .clips
            .iter()
            .map(|c| {
                (
                    c.name.clone(),
                    self.metrics.iter().map(|&m| self.cell(m, c.ssim, c.psnr)).collect(),
                )
            })
            .collect();
        rows.push((
            "mean".into(),
            self.metrics.iter().map(|&m| self.cell(m, self.ssim, self.psnr)).collect(),
        ));
        rows
    }

    pub fn header(&self) -> Vec<&'static str> {
        std::iter::once("clip").chain(self.metrics.iter().map(|m| m.label())).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.header())?;
        for (name, cells) in self.rows() {
            w.write_record(std::iter::once(name).chain(cells))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Fixed-width text table, one row per clip and a final mean row.
    pub fn table(&self) -> String {
        let header = self.header();
        let rows = self.rows();
        let first = rows.iter().map(|r| r.0.len()).chain([4]).max().unwrap_or(4);
        let mut out = String::new();
        let _ = write!(out, "{:<first$}", header[0]);
        for h in &header[1..] {
            let _ = write!(out, "  {h:>8}");
        }
        out.push('\n');
        for (name, cells) in rows {
            let _ = write!(out, "{name:<first$}");
            for c in cells {
                let _ = write!(out, "  {c:>8}");
            }
            out.push('\n');
        }
        out
    }
}

/// Produces the frames of a clip a model would generate: one per window
/// center, i.e. frames `3 .. len − 3`.
pub trait FrameGenerator {
    fn generate_clip(&self, clip: &FrameClip) -> Result<Vec<Image>>;
}

/// Runs `model` over every clip and scores the generated frames against the
/// ground truth. Frames within three of either clip end are not scored;
/// per-clip means are averaged without weighting.
pub fn evaluate_corpus(model: &dyn FrameGenerator, clips: &[FrameClip], metrics: &[Metric]) -> Result<MetricReport> {
    if clips.is_empty() {
        return Err(Error::invalid("no clips to evaluate"));
    }
    let mut per_clip = Vec::with_capacity(clips.len());
    for clip in clips {
        let generated = model.generate_clip(clip)?;
        let targets = &clip.frames()[WINDOW_RADIUS..clip.len() - WINDOW_RADIUS];
        if generated.len() != targets.len() {
            return Err(Error::shape(
                "evaluate_corpus",
                format!(
                    "clip {} has {} scored frames but the model produced {}",
                    clip.name,
                    targets.len(),
                    generated.len()
                ),
            ));
        }
        let (mut s, mut p) = (0.0, 0.0);
        for (gen, truth) in generated.iter().zip(targets) {
            s += ssim(gen, truth)?;
            p += psnr(gen, truth, 1.0)?;
        }
        let n = targets.len() as f64;
        per_clip.push(ClipMetrics {
            name: clip.name.clone(),
            frames: targets.len(),
            ssim: s / n,
            psnr: p / n,
        });
    }
    let k = per_clip.len() as f64;
    Ok(MetricReport {
        ssim: per_clip.iter().map(|c| c.ssim).sum::<f64>() / k,
        psnr: per_clip.iter().map(|c| c.psnr).sum::<f64>() / k,
        clips: per_clip,
        metrics: metrics.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_list_parsing() {
        assert_eq!(parse_metrics("psnr,ssim").unwrap(), vec![Metric::Ssim, Metric::Psnr]);
        assert_eq!(parse_metrics("LSE-D, fvd").unwrap(), vec![Metric::Fvd, Metric::LseD]);
        assert!(parse_metrics("ssim,lpips").is_err());
        assert!(parse_metrics("").is_err());
    }

    #[test]
    fn small_images_are_rejected_by_ssim() {
        let a = Image::zeros(1, 10, 30);
        assert!(ssim(&a, &a).is_err());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(psnr(&Image::zeros(3, 4, 4), &Image::zeros(1, 4, 4), 1.0).is_err());
    }
}
