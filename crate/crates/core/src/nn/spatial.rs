//! Resampling, pooling and normalization over the spatial axes of `[N, C, H, W]`.

use super::graph::Var;
use super::tensor::{matmul, Element, Tensor};
use crate::error::{Error, Result};

/// Row `i` holds the weights output sample `i` takes from each input sample.
#[derive(Clone, Debug, PartialEq)]
pub struct AxisResampler {
    pub in_len: usize,
    pub out_len: usize,
    weights: Vec<f64>,
}

impl AxisResampler {
    /// Adaptive average pooling bins: output `i` averages inputs
    /// `floor(i*in/out) .. ceil((i+1)*in/out)`.
    pub fn adaptive_average(in_len: usize, out_len: usize) -> Self {
        let mut weights = vec![0.0; in_len * out_len];
        for i in 0..out_len {
            let start = i * in_len / out_len;
            let end = ((i + 1) * in_len).div_ceil(out_len);
            let w = 1.0 / (end - start) as f64;
            for j in start..end {
                weights[i * in_len + j] = w;
            }
        }
        AxisResampler {
            in_len,
            out_len,
            weights,
        }
    }

    /// Linear interpolation with half-pixel centers (`align_corners = false`).
    pub fn linear(in_len: usize, out_len: usize) -> Self {
        let mut weights = vec![0.0; in_len * out_len];
        let scale = in_len as f64 / out_len as f64;
        for i in 0..out_len {
            let src = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (src.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            let frac = src - i0 as f64;
            weights[i * in_len + i0] += 1.0 - frac;
            weights[i * in_len + i1] += frac;
        }
        AxisResampler {
            in_len,
            out_len,
            weights,
        }
    }

    /// Averages when shrinking (or keeping) the axis, interpolates when growing it.
    pub fn align(in_len: usize, out_len: usize) -> Self {
        if out_len <= in_len {
            Self::adaptive_average(in_len, out_len)
        } else {
            Self::linear(in_len, out_len)
        }
    }

    pub fn weight(&self, out_index: usize, in_index: usize) -> f64 {
        self.weights[out_index * self.in_len + in_index]
    }

    fn as_elements<E: Element>(&self) -> Vec<E> {
        self.weights.iter().map(|&w| E::from_f64(w)).collect()
    }
}

/// Applies `rows · X · colsᵀ` to every `H×W` plane of an `[N, C, H, W]` buffer.
fn resample_planes<E: Element>(
    x: &[E],
    planes: usize,
    rows: &[E],
    (rin, rout): (usize, usize),
    cols: &[E],
    (cin, cout): (usize, usize),
) -> Vec<E> {
    // X · colsᵀ for all planes at once: [planes*rin, cin] x [cin, cout]
    let mut tmp = vec![E::zero(); planes * rin * cout];
    matmul(x, false, cols, true, &mut tmp, planes * rin, cin, cout, false);
    let mut out = vec![E::zero(); planes * rout * cout];
    for (src, dst) in tmp.chunks(rin * cout).zip(out.chunks_mut(rout * cout)) {
        matmul(rows, false, src, false, dst, rout, rin, cout, false);
    }
    out
}

/// Adjoint of [`resample_planes`]: `rowsᵀ · G · cols`.
fn resample_planes_adjoint<E: Element>(
    g: &[E],
    planes: usize,
    rows: &[E],
    (rin, rout): (usize, usize),
    cols: &[E],
    (cin, cout): (usize, usize),
) -> Vec<E> {
    let mut tmp = vec![E::zero(); planes * rin * cout];
    for (src, dst) in g.chunks(rout * cout).zip(tmp.chunks_mut(rin * cout)) {
        matmul(rows, true, src, false, dst, rin, rout, cout, false);
    }
    let mut out = vec![E::zero(); planes * rin * cin];
    matmul(&tmp, false, cols, false, &mut out, planes * rin, cout, cin, false);
    out
}

impl<'g, E: Element> Var<'g, E> {
    /// Separable linear resampling of the spatial axes.
    pub fn resample(self, rows: &AxisResampler, cols: &AxisResampler) -> Result<Var<'g, E>> {
        let x = self.value();
        let (n, c, h, w) = x.dims4()?;
        if h != rows.in_len || w != cols.in_len {
            return Err(Error::shape(
                "resample",
                format!(
                    "input {h}x{w} but resampler expects {}x{}",
                    rows.in_len, cols.in_len
                ),
            ));
        }
        let (ho, wo) = (rows.out_len, cols.out_len);
        let (rw, cw) = (rows.as_elements::<E>(), cols.as_elements::<E>());
        let out = resample_planes(x.data(), n * c, &rw, (h, ho), &cw, (w, wo));
        Ok(self.graph().push(
            Tensor::new(&[n, c, ho, wo], out)?,
            &[self],
            Box::new(move |ctx| {
                let gx = resample_planes_adjoint(ctx.grad.data(), n * c, &rw, (h, ho), &cw, (w, wo));
                vec![Some(Tensor::new(&[n, c, h, w], gx).unwrap())]
            }),
        ))
    }

    /// Aligns the spatial size to `height × width` (adaptive average pooling
    /// when shrinking, bilinear interpolation when growing).
    pub fn resize_to(self, height: usize, width: usize) -> Result<Var<'g, E>> {
        let (_, _, h, w) = self.value().dims4()?;
        if (h, w) == (height, width) {
            return Ok(self);
        }
        self.resample(&AxisResampler::align(h, height), &AxisResampler::align(w, width))
    }

    /// Nearest-neighbour upsampling by an integer factor.
    pub fn upsample_nearest(self, factor: usize) -> Result<Var<'g, E>> {
        let x = self.value();
        let (n, c, h, w) = x.dims4()?;
        if factor == 0 {
            return Err(Error::invalid("upsample factor must be positive"));
        }
        let (ho, wo) = (h * factor, w * factor);
        let mut out = vec![E::zero(); n * c * ho * wo];
        for (src, dst) in x.data().chunks(h * w).zip(out.chunks_mut(ho * wo)) {
            for (srow, block) in src.chunks(w).zip(dst.chunks_mut(factor * wo)) {
                let (first, rest) = block.split_at_mut(wo);
                for (&s, d) in srow.iter().zip(first.chunks_mut(factor)) {
                    d.fill(s);
                }
                for row in rest.chunks_mut(wo) {
                    row.copy_from_slice(first);
                }
            }
        }
        Ok(self.graph().push(
            Tensor::new(&[n, c, ho, wo], out)?,
            &[self],
            Box::new(move |ctx| {
                let mut gx = vec![E::zero(); n * c * h * w];
                for (src, dst) in ctx.grad.data().chunks(ho * wo).zip(gx.chunks_mut(h * w)) {
                    for (block, drow) in src.chunks(factor * wo).zip(dst.chunks_mut(w)) {
                        for row in block.chunks(wo) {
                            for (d, s) in drow.iter_mut().zip(row.chunks(factor)) {
                                *d = s.iter().fold(*d, |acc, &v| acc + v);
                            }
                        }
                    }
                }
                vec![Some(Tensor::new(&[n, c, h, w], gx).unwrap())]
            }),
        ))
    }

    /// Non-overlapping max pooling with a square window; trailing rows and
    /// columns that do not fill a window are dropped.
    pub fn max_pool2d(self, window: usize) -> Result<Var<'g, E>> {
        let x = self.value();
        let (n, c, h, w) = x.dims4()?;
        if window == 0 || h < window || w < window {
            return Err(Error::shape(
                "max_pool2d",
                format!("window {window} does not fit {h}x{w}"),
            ));
        }
        let (ho, wo) = (h / window, w / window);
        let mut out = vec![E::zero(); n * c * ho * wo];
        let mut argmax = vec![0usize; n * c * ho * wo];
        for (p, src) in x.data().chunks(h * w).enumerate() {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut best = oy * window * w + ox * window;
                    for i in 0..window {
                        for j in 0..window {
                            let idx = (oy * window + i) * w + ox * window + j;
                            if src[idx] > src[best] {
                                best = idx;
                            }
                        }
                    }
                    let o = (p * ho + oy) * wo + ox;
                    out[o] = src[best];
                    argmax[o] = p * h * w + best;
                }
            }
        }
        Ok(self.graph().push(
            Tensor::new(&[n, c, ho, wo], out)?,
            &[self],
            Box::new(move |ctx| {
                let mut gx = vec![E::zero(); n * c * h * w];
                for (&src, &g) in argmax.iter().zip(ctx.grad.data()) {
                    gx[src] = gx[src] + g;
                }
                vec![Some(Tensor::new(&[n, c, h, w], gx).unwrap())]
            }),
        ))
    }

    /// Per-sample, per-channel normalization to zero mean and unit variance
    /// over the spatial axes, without a learned affine.
    pub fn instance_norm(self, eps: f64) -> Result<Var<'g, E>> {
        let x = self.value();
        let (_, _, h, w) = x.dims4()?;
        let plane = h * w;
        let count = E::from_f64(plane as f64);
        let eps = E::from_f64(eps);
        let mut out = (*x).clone();
        let mut inv_std = Vec::with_capacity(x.numel() / plane.max(1));
        for chunk in out.data_mut().chunks_mut(plane) {
            let mean = chunk.iter().copied().sum::<E>() / count;
            let var = chunk.iter().map(|&v| (v - mean) * (v - mean)).sum::<E>() / count;
            let inv = E::one() / (var + eps).sqrt();
            chunk.iter_mut().for_each(|v| *v = (*v - mean) * inv);
            inv_std.push(inv);
        }
        Ok(self.graph().push(
            out,
            &[self],
            Box::new(move |ctx| {
                let mut gx = ctx.grad.clone();
                for ((gc, yc), &inv) in gx
                    .data_mut()
                    .chunks_mut(plane)
                    .zip(ctx.output.data().chunks(plane))
                    .zip(&inv_std)
                {
                    let mean_g = gc.iter().copied().sum::<E>() / count;
                    let mean_gy = gc.iter().zip(yc).map(|(&g, &y)| g * y).sum::<E>() / count;
                    for (g, &y) in gc.iter_mut().zip(yc) {
                        *g = inv * (*g - mean_g - y * mean_gy);
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }
}
