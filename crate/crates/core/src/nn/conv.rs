//! 2-D convolution lowered to GEMMs over im2col buffers, one per group of samples.

use super::graph::Var;
use super::tensor::{matmul, Element, Tensor};
use crate::error::{Error, Result};

/// Geometry of one sample's convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    fn rows(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// A 1×1 unpadded, unstrided kernel: the image already is its column matrix.
    fn is_pointwise(&self) -> bool {
        self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.pad == 0
    }

    /// Output indices along one axis whose input tap `o·s + k − pad` lies in `0..len`.
    fn valid_range(&self, k: usize, len: usize, out_len: usize) -> std::ops::Range<usize> {
        let (s, p) = (self.stride, self.pad);
        let lo = if k >= p { 0 } else { (p - k).div_ceil(s) };
        let hi = if len + p > k { ((len + p - k - 1) / s + 1).min(out_len) } else { 0 };
        lo..hi.max(lo)
    }
}

/// Output extent of a convolution along one axis.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = len + 2 * pad;
    (padded >= kernel && stride > 0).then(|| (padded - kernel) / stride + 1)
}

/// Columns per GEMM to aim for; small planes are batched up to this width.
const TARGET_COLS: usize = 2048;

/// Builds the `[C*kh*kw, m*Ho*Wo]` column matrix of `m` consecutive `[C, H, W]`
/// images in `x`, sample `j` occupying columns `j*Ho*Wo..`. Rows are appended
/// in order so only padding taps are written as zeros.
fn im2col<E: Element>(x: &[E], g: &ConvGeometry) -> Vec<E> {
    let (wo, plane) = (g.out_w, g.height * g.width);
    let in_plane = g.in_channels * plane;
    let m = x.len() / in_plane;
    let mut cols = Vec::with_capacity(g.rows() * m * g.cols());
    for c in 0..g.in_channels {
        for ki in 0..g.kernel_h {
            let rows = g.valid_range(ki, g.height, g.out_h);
            for kj in 0..g.kernel_w {
                let xs = g.valid_range(kj, g.width, g.out_w);
                let first = (xs.start * g.stride + kj).wrapping_sub(g.pad);
                for j in 0..m {
                    let src = &x[j * in_plane + c * plane..][..plane];
                    for oy in 0..g.out_h {
                        if xs.is_empty() || !rows.contains(&oy) {
                            cols.resize(cols.len() + wo, E::zero());
                            continue;
                        }
                        let src_row = &src[(oy * g.stride + ki - g.pad) * g.width..][..g.width];
                        cols.resize(cols.len() + xs.start, E::zero());
                        if g.stride == 1 {
                            cols.extend_from_slice(&src_row[first..first + xs.len()]);
                        } else {
                            cols.extend((0..xs.len()).map(|i| src_row[first + i * g.stride]));
                        }
                        cols.resize(cols.len() + wo - xs.end, E::zero());
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: accumulates column gradients onto the `[C, H, W]` image `x`.
fn col2im<E: Element>(cols: &[E], ld: usize, offset: usize, g: &ConvGeometry, x: &mut [E]) {
    let wo = g.out_w;
    let plane = g.height * g.width;
    for c in 0..g.in_channels {
        let dst = &mut x[c * plane..][..plane];
        for ki in 0..g.kernel_h {
            let rows = g.valid_range(ki, g.height, g.out_h);
            for kj in 0..g.kernel_w {
                let xs = g.valid_range(kj, g.width, g.out_w);
                if xs.is_empty() {
                    continue;
                }
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let src_row = &cols[row * ld + offset..][..g.cols()];
                let first = xs.start * g.stride + kj - g.pad;
                for oy in rows.clone() {
                    let dst_row = &mut dst[(oy * g.stride + ki - g.pad) * g.width..][..g.width];
                    let src = &src_row[oy * wo..][..wo][xs.clone()];
                    if g.stride == 1 {
                        for (d, &s) in dst_row[first..first + src.len()].iter_mut().zip(src) {
                            *d = *d + s;
                        }
                    } else {
                        for (i, &s) in src.iter().enumerate() {
                            let d = &mut dst_row[first + i * g.stride];
                            *d = *d + s;
                        }
                    }
                }
            }
        }
    }
}

/// Column matrices for groups of `group` consecutive samples.
struct Columns<E> {
    group: usize,
    /// One `[k, group·P]` buffer per group (the last may be narrower); empty
    /// for pointwise kernels on single-sample groups, which read the input directly.
    buffers: Vec<Vec<E>>,
}

impl<'g, E: Element> Var<'g, E> {
    /// Cross-correlation of `[N, Cin, H, W]` with `[Cout, Cin, kh, kw]` weights,
    /// symmetric zero padding and an optional `[Cout]` bias.
    pub fn conv2d(
        self,
        weight: Var<'g, E>,
        bias: Option<Var<'g, E>>,
        stride: usize,
        pad: usize,
    ) -> Result<Var<'g, E>> {
        let (x, w) = (self.value(), weight.value());
        let (n, cin, h, wd) = x.dims4()?;
        let (cout, wcin, kh, kw) = w.dims4()?;
        if wcin != cin {
            return Err(Error::shape(
                "conv2d",
                format!("input has {cin} channels, weight expects {wcin}"),
            ));
        }
        if let Some(b) = &bias {
            if b.shape() != [cout] {
                return Err(Error::shape(
                    "conv2d",
                    format!("bias {:?} for {cout} output channels", b.shape()),
                ));
            }
        }
        let (Some(ho), Some(wo)) = (
            conv_out_len(h, kh, stride, pad),
            conv_out_len(wd, kw, stride, pad),
        ) else {
            return Err(Error::shape(
                "conv2d",
                format!("kernel {kh}x{kw} does not fit {h}x{wd} with padding {pad}"),
            ));
        };
        let geom = ConvGeometry {
            in_channels: cin,
            height: h,
            width: wd,
            kernel_h: kh,
            kernel_w: kw,
            stride,
            pad,
            out_h: ho,
            out_w: wo,
        };
        let (k, plane) = (geom.rows(), geom.cols());
        let in_plane = cin * h * wd;
        let group = TARGET_COLS.div_ceil(plane.max(1)).clamp(1, n.max(1));
        let direct = group == 1 && geom.is_pointwise();
        let columns = Columns {
            group,
            buffers: if direct {
                Vec::new()
            } else {
                (0..n)
                    .step_by(group)
                    .map(|b0| {
                        let m = group.min(n - b0);
                        im2col(&x.data()[b0 * in_plane..][..m * in_plane], &geom)
                    })
                    .collect()
            },
        };

        let mut out = vec![E::zero(); n * cout * plane];
        let mut mat = Vec::new();
        for (gi, b0) in (0..n).step_by(group).enumerate() {
            let m = group.min(n - b0);
            if direct {
                let dst = &mut out[b0 * cout * plane..][..cout * plane];
                matmul(w.data(), false, &x.data()[b0 * in_plane..][..in_plane], false, dst, cout, k, plane, false);
            } else if m == 1 {
                let dst = &mut out[b0 * cout * plane..][..cout * plane];
                matmul(w.data(), false, &columns.buffers[gi], false, dst, cout, k, plane, false);
            } else {
                mat.resize(cout * m * plane, E::zero());
                matmul(w.data(), false, &columns.buffers[gi], false, &mut mat, cout, k, m * plane, false);
                for co in 0..cout {
                    for j in 0..m {
                        out[((b0 + j) * cout + co) * plane..][..plane]
                            .copy_from_slice(&mat[co * m * plane + j * plane..][..plane]);
                    }
                }
            }
        }
        if let Some(b) = &bias {
            let bv = b.value();
            for (dst, &v) in out.chunks_mut(plane).zip(bv.data().iter().cycle()) {
                dst.iter_mut().for_each(|d| *d = *d + v);
            }
        }
        let out = Tensor::new(&[n, cout, ho, wo], out)?;

        let mut inputs = vec![self, weight];
        inputs.extend(bias);
        Ok(self.graph().push(
            out,
            &inputs,
            Box::new(move |ctx| {
                let g = ctx.grad.data();
                let w = &ctx.inputs[1];
                let x = &ctx.inputs[0];
                let group = columns.group;
                let mut gx = ctx.needs[0].then(|| vec![E::zero(); n * in_plane]);
                let mut gw = ctx.needs[1].then(|| vec![E::zero(); cout * k]);
                let mut gmat = Vec::new();
                let mut gcols = Vec::new();
                for (gi, b0) in (0..n).step_by(group).enumerate() {
                    let m = group.min(n - b0);
                    let ld = m * plane;
                    // [m, Cout, P] -> [Cout, m*P]
                    let gm: &[E] = if m == 1 {
                        &g[b0 * cout * plane..][..cout * plane]
                    } else {
                        gmat.resize(cout * ld, E::zero());
                        for co in 0..cout {
                            for j in 0..m {
                                gmat[co * ld + j * plane..][..plane]
                                    .copy_from_slice(&g[((b0 + j) * cout + co) * plane..][..plane]);
                            }
                        }
                        &gmat
                    };
                    let cols: &[E] = if direct {
                        &x.data()[b0 * in_plane..][..in_plane]
                    } else {
                        &columns.buffers[gi]
                    };
                    if let Some(gw) = gw.as_mut() {
                        matmul(gm, false, cols, true, gw, cout, ld, k, gi > 0);
                    }
                    if let Some(gx) = gx.as_mut() {
                        if direct {
                            let dst = &mut gx[b0 * in_plane..][..in_plane];
                            matmul(w.data(), true, gm, false, dst, k, cout, plane, false);
                        } else {
                            gcols.resize(k * ld, E::zero());
                            matmul(w.data(), true, gm, false, &mut gcols, k, cout, ld, false);
                            for j in 0..m {
                                col2im(&gcols, ld, j * plane, &geom, &mut gx[(b0 + j) * in_plane..][..in_plane]);
                            }
                        }
                    }
                }
                let mut grads = vec![
                    gx.map(|v| Tensor::new(&[n, cin, h, wd], v).unwrap()),
                    gw.map(|v| Tensor::new(&[cout, cin, kh, kw], v).unwrap()),
                ];
                if ctx.inputs.len() == 3 {
                    grads.push(ctx.needs[2].then(|| {
                        let mut gb = vec![E::zero(); cout];
                        for (row, v) in g.chunks(plane).zip((0..cout).cycle()) {
                            gb[v] = row.iter().fold(gb[v], |acc, &s| acc + s);
                        }
                        Tensor::new(&[cout], gb).unwrap()
                    }));
                }
                grads
            }),
        ))
    }
}
