//! Elementwise, reduction and structural ops on [`Var`]s.

use super::graph::Var;
use super::tensor::{matmul, Element, Tensor};
use crate::error::{Error, Result};

fn same_shape<E: Element>(op: &'static str, a: &Var<'_, E>, b: &Var<'_, E>) -> Result<()> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa != sb {
        return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
    }
    Ok(())
}

impl<'g, E: Element> Var<'g, E> {
    /// Applies `f` elementwise; `df(x, y)` is the derivative given input and output.
    fn unary(self, f: impl Fn(E) -> E, df: impl Fn(E, E) -> E + 'static) -> Var<'g, E> {
        let out = self.value().map(f);
        self.graph().push(
            out,
            &[self],
            Box::new(move |ctx| {
                let x = ctx.inputs[0].data();
                let y = ctx.output.data();
                let data = ctx
                    .grad
                    .data()
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(&g, (&x, &y))| g * df(x, y))
                    .collect();
                vec![Some(Tensor::new(ctx.grad.shape(), data).expect("unary grad"))]
            }),
        )
    }

    pub fn add(self, other: Var<'g, E>) -> Result<Var<'g, E>> {
        same_shape("add", &self, &other)?;
        let out = self.value().zip_map(&other.value(), |a, b| a + b)?;
        Ok(self.graph().push(
            out,
            &[self, other],
            Box::new(|ctx| vec![Some(ctx.grad.clone()), Some(ctx.grad.clone())]),
        ))
    }

    pub fn sub(self, other: Var<'g, E>) -> Result<Var<'g, E>> {
        same_shape("sub", &self, &other)?;
        let out = self.value().zip_map(&other.value(), |a, b| a - b)?;
        Ok(self.graph().push(
            out,
            &[self, other],
            Box::new(|ctx| {
                let neg = ctx.needs[1].then(|| ctx.grad.map(|g| -g));
                vec![Some(ctx.grad.clone()), neg]
            }),
        ))
    }

    pub fn mul(self, other: Var<'g, E>) -> Result<Var<'g, E>> {
        same_shape("mul", &self, &other)?;
        let out = self.value().zip_map(&other.value(), |a, b| a * b)?;
        Ok(self.graph().push(
            out,
            &[self, other],
            Box::new(|ctx| {
                let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
                let ga = ctx.needs[0].then(|| ctx.grad.zip_map(b, |g, b| g * b).unwrap());
                let gb = ctx.needs[1].then(|| ctx.grad.zip_map(a, |g, a| g * a).unwrap());
                vec![ga, gb]
            }),
        ))
    }

    pub fn scale(self, factor: f64) -> Var<'g, E> {
        let s = E::from_f64(factor);
        self.unary(move |x| x * s, move |_, _| s)
    }

    pub fn add_scalar(self, offset: f64) -> Var<'g, E> {
        let c = E::from_f64(offset);
        self.unary(move |x| x + c, |_, _| E::one())
    }

    pub fn square(self) -> Var<'g, E> {
        let two = E::from_f64(2.0);
        self.unary(|x| x * x, move |x, _| two * x)
    }

    pub fn relu(self) -> Var<'g, E> {
        self.unary(
            |x| if x > E::zero() { x } else { E::zero() },
            |x, _| if x > E::zero() { E::one() } else { E::zero() },
        )
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'g, E> {
        let s = E::from_f64(slope);
        self.unary(
            move |x| if x > E::zero() { x } else { x * s },
            move |x, _| if x > E::zero() { E::one() } else { s },
        )
    }

    pub fn sigmoid(self) -> Var<'g, E> {
        self.unary(sigmoid, |_, y| y * (E::one() - y))
    }

    /// `ln(1 + e^x)`, evaluated without overflow.
    pub fn softplus(self) -> Var<'g, E> {
        self.unary(
            |x| x.max(E::zero()) + (-x.abs()).exp().ln_1p(),
            |x, _| sigmoid(x),
        )
    }

    /// Sum of all elements, as a single-element tensor of shape `[]`.
    pub fn sum(self) -> Var<'g, E> {
        let out = Tensor::scalar(self.value().sum());
        self.graph().push(
            out,
            &[self],
            Box::new(|ctx| {
                let g = ctx.grad.data()[0];
                vec![Some(Tensor::full(ctx.inputs[0].shape(), g))]
            }),
        )
    }

    pub fn mean(self) -> Var<'g, E> {
        let n = self.value().numel().max(1);
        self.sum().scale(1.0 / n as f64)
    }

    /// Per-sample L1 norm over every axis but the first: `[N, ...] -> [N]`.
    pub fn l1_norm_per_sample(self) -> Result<Var<'g, E>> {
        let value = self.value();
        let n = *value
            .shape()
            .first()
            .ok_or_else(|| Error::shape("l1_norm_per_sample", "scalar input"))?;
        let stride = value.numel() / n.max(1);
        let out: Vec<E> = value
            .data()
            .chunks(stride.max(1))
            .take(n)
            .map(|c| c.iter().map(|v| v.abs()).sum())
            .collect();
        Ok(self.graph().push(
            Tensor::new(&[n], out)?,
            &[self],
            Box::new(move |ctx| {
                let x = &ctx.inputs[0];
                let mut gx = Tensor::zeros(x.shape());
                for (i, (gchunk, xchunk)) in gx
                    .data_mut()
                    .chunks_mut(stride.max(1))
                    .zip(x.data().chunks(stride.max(1)))
                    .enumerate()
                {
                    let g = ctx.grad.data()[i];
                    for (o, &v) in gchunk.iter_mut().zip(xchunk) {
                        *o = if v > E::zero() {
                            g
                        } else if v < E::zero() {
                            -g
                        } else {
                            E::zero()
                        };
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Per-sample Euclidean norm over every axis but the first: `[N, ...] -> [N]`.
    /// The gradient at a zero vector is taken as zero.
    pub fn l2_norm_per_sample(self) -> Result<Var<'g, E>> {
        let value = self.value();
        let n = *value
            .shape()
            .first()
            .ok_or_else(|| Error::shape("l2_norm_per_sample", "scalar input"))?;
        let stride = (value.numel() / n.max(1)).max(1);
        let out: Vec<E> = value
            .data()
            .chunks(stride)
            .take(n)
            .map(|c| c.iter().map(|&v| v * v).sum::<E>().sqrt())
            .collect();
        Ok(self.graph().push(
            Tensor::new(&[n], out)?,
            &[self],
            Box::new(move |ctx| {
                let x = &ctx.inputs[0];
                let mut gx = Tensor::zeros(x.shape());
                for (i, (gchunk, xchunk)) in gx
                    .data_mut()
                    .chunks_mut(stride)
                    .zip(x.data().chunks(stride))
                    .enumerate()
                {
                    let norm = ctx.output.data()[i];
                    if norm <= E::zero() {
                        continue;
                    }
                    let g = ctx.grad.data()[i] / norm;
                    for (o, &v) in gchunk.iter_mut().zip(xchunk) {
                        *o = g * v;
                    }
                }
                vec![Some(gx)]
            }),
        ))
    }

    /// Reinterprets the buffer under a new shape with the same element count.
    pub fn reshape(self, shape: &[usize]) -> Result<Var<'g, E>> {
        let out = (*self.value()).clone().reshape(shape)?;
        Ok(self.graph().push(
            out,
            &[self],
            Box::new(|ctx| {
                vec![Some(
                    ctx.grad
                        .clone()
                        .reshape(ctx.inputs[0].shape())
                        .expect("reshape grad"),
                )]
            }),
        ))
    }

    /// `[N, d] x [C, d]^T -> [N, C]`.
    pub fn matmul_nt(self, weight: Var<'g, E>) -> Result<Var<'g, E>> {
        let (x, w) = (self.value(), weight.value());
        let (&[n, d], &[c, dw]) = (x.shape(), w.shape()) else {
            return Err(Error::shape(
                "matmul_nt",
                format!("expected [N, d] and [C, d], got {:?} and {:?}", x.shape(), w.shape()),
            ));
        };
        if d != dw {
            return Err(Error::shape(
                "matmul_nt",
                format!("inner dimensions differ: {d} vs {dw}"),
            ));
        }
        let mut out = Tensor::zeros(&[n, c]);
        matmul(x.data(), false, w.data(), true, out.data_mut(), n, d, c, false);
        Ok(self.graph().push(
            out,
            &[self, weight],
            Box::new(move |ctx| {
                let (x, w, g) = (&ctx.inputs[0], &ctx.inputs[1], ctx.grad);
                let gx = ctx.needs[0].then(|| {
                    let mut gx = Tensor::zeros(&[n, d]);
                    matmul(g.data(), false, w.data(), false, gx.data_mut(), n, c, d, false);
                    gx
                });
                let gw = ctx.needs[1].then(|| {
                    let mut gw = Tensor::zeros(&[c, d]);
                    matmul(g.data(), true, x.data(), false, gw.data_mut(), c, n, d, false);
                    gw
                });
                vec![gx, gw]
            }),
        ))
    }

    /// Multiplies channel `c` of sample `n` by `scale[n, c]`: `[N,C,H,W] x [N,C]`.
    pub fn channel_scale(self, scale: Var<'g, E>) -> Result<Var<'g, E>> {
        let (x, s) = (self.value(), scale.value());
        let (n, c, h, w) = x.dims4()?;
        if s.shape() != [n, c] {
            return Err(Error::shape(
                "channel_scale",
                format!("feature map {:?} needs scale [{n}, {c}], got {:?}", x.shape(), s.shape()),
            ));
        }
        let plane = h * w;
        let mut out = (*x).clone();
        for (chunk, &sv) in out.data_mut().chunks_mut(plane).zip(s.data()) {
            chunk.iter_mut().for_each(|v| *v = *v * sv);
        }
        Ok(self.graph().push(
            out,
            &[self, scale],
            Box::new(move |ctx| {
                let (x, s, g) = (&ctx.inputs[0], &ctx.inputs[1], ctx.grad);
                let gx = ctx.needs[0].then(|| {
                    let mut gx = g.clone();
                    for (chunk, &sv) in gx.data_mut().chunks_mut(plane).zip(s.data()) {
                        chunk.iter_mut().for_each(|v| *v = *v * sv);
                    }
                    gx
                });
                let gs = ctx.needs[1].then(|| {
                    let data = g
                        .data()
                        .chunks(plane)
                        .zip(x.data().chunks(plane))
                        .map(|(gc, xc)| gc.iter().zip(xc).map(|(&a, &b)| a * b).sum())
                        .collect();
                    Tensor::new(&[n, c], data).unwrap()
                });
                vec![gx, gs]
            }),
        ))
    }

    /// Fixed per-channel affine map `x * scale[c] + shift[c]` on `[N,C,H,W]`.
    pub fn channel_affine(self, scale: &[f64], shift: &[f64]) -> Result<Var<'g, E>> {
        let x = self.value();
        let (_, c, h, w) = x.dims4()?;
        if scale.len() != c || shift.len() != c {
            return Err(Error::shape(
                "channel_affine",
                format!("{c} channels, {} scales, {} shifts", scale.len(), shift.len()),
            ));
        }
        let plane = h * w;
        let scale: Vec<E> = scale.iter().map(|&v| E::from_f64(v)).collect();
        let shift: Vec<E> = shift.iter().map(|&v| E::from_f64(v)).collect();
        let mut out = (*x).clone();
        for (i, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
            let (a, b) = (scale[i % c], shift[i % c]);
            chunk.iter_mut().for_each(|v| *v = *v * a + b);
        }
        Ok(self.graph().push(
            out,
            &[self],
            Box::new(move |ctx| {
                let mut gx = ctx.grad.clone();
                for (i, chunk) in gx.data_mut().chunks_mut(plane).enumerate() {
                    let a = scale[i % c];
                    chunk.iter_mut().for_each(|v| *v = *v * a);
                }
                vec![Some(gx)]
            }),
        ))
    }
}

/// Concatenates `[N, C_i, ...]` tensors along axis 1.
pub fn concat_channels<'g, E: Element>(parts: &[Var<'g, E>]) -> Result<Var<'g, E>> {
    let Some(first) = parts.first() else {
        return Err(Error::shape("concat_channels", "nothing to concatenate"));
    };
    let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
    let s0 = values[0].shape().to_vec();
    if s0.len() < 2 {
        return Err(Error::shape("concat_channels", format!("rank too small: {s0:?}")));
    }
    let n = s0[0];
    let inner: usize = s0[2..].iter().product();
    let mut channels = Vec::with_capacity(parts.len());
    for v in &values {
        let s = v.shape();
        if s.len() != s0.len() || s[0] != n || s[2..] != s0[2..] {
            return Err(Error::shape("concat_channels", format!("{s:?} vs {s0:?}")));
        }
        channels.push(s[1]);
    }
    let total: usize = channels.iter().sum();
    let mut shape = s0.clone();
    shape[1] = total;
    let mut data = Vec::with_capacity(n * total * inner);
    for b in 0..n {
        for (v, &c) in values.iter().zip(&channels) {
            data.extend_from_slice(&v.data()[b * c * inner..(b + 1) * c * inner]);
        }
    }
    let out = Tensor::new(&shape, data)?;
    Ok(first.graph().push(
        out,
        parts,
        Box::new(move |ctx| {
            let g = ctx.grad.data();
            let mut offset = 0;
            let mut grads = Vec::with_capacity(channels.len());
            for (i, &c) in channels.iter().enumerate() {
                if ctx.needs[i] {
                    let mut gi = Vec::with_capacity(n * c * inner);
                    for b in 0..n {
                        let start = (b * total + offset) * inner;
                        gi.extend_from_slice(&g[start..start + c * inner]);
                    }
                    grads.push(Some(Tensor::new(ctx.inputs[i].shape(), gi).unwrap()));
                } else {
                    grads.push(None);
                }
                offset += c;
            }
            grads
        }),
    ))
}

/// Sum of several equally shaped vars.
pub fn sum_all<'g, E: Element>(parts: &[Var<'g, E>]) -> Result<Var<'g, E>> {
    let mut iter = parts.iter().copied();
    let first = iter
        .next()
        .ok_or_else(|| Error::shape("sum_all", "nothing to sum"))?;
    iter.try_fold(first, |acc, v| acc.add(v))
}

pub(crate) fn sigmoid<E: Element>(x: E) -> E {
    if x >= E::zero() {
        E::one() / (E::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (E::one() + e)
    }
}
