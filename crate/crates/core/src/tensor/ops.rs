use super::{numel, Element, Tensor};
use crate::error::{Error, Result};

fn same_shape<T: Element>(op: &'static str, a: &Tensor<T>, b: &Tensor<T>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("operands differ: {:?} vs {:?}", a.shape(), b.shape()),
        ));
    }
    Ok(())
}

fn map_unary<T: Element>(
    name: &'static str,
    x: &Tensor<T>,
    f: impl Fn(T) -> T,
    // derivative expressed through (input, output)
    df: impl Fn(T, T) -> T + Send + Sync + 'static,
) -> Tensor<T> {
    let data: Vec<T> = x.data().iter().map(|&v| f(v)).collect();
    Tensor::from_op(name, x.shape().to_vec(), data, vec![x.clone()], move |ctx| {
        let input = ctx.inputs[0].data();
        let g = ctx
            .grad
            .iter()
            .zip(input.iter().zip(ctx.output))
            .map(|(&g, (&x, &y))| g * df(x, y))
            .collect();
        vec![Some(g)]
    })
}

impl<T: Element> Tensor<T> {
    pub fn add(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("add", self, other)?;
        let data = self.data().iter().zip(other.data()).map(|(&a, &b)| a + b).collect();
        Ok(Tensor::from_op(
            "add",
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            |ctx| vec![Some(ctx.grad.to_vec()), Some(ctx.grad.to_vec())],
        ))
    }

    pub fn sub(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("sub", self, other)?;
        let data = self.data().iter().zip(other.data()).map(|(&a, &b)| a - b).collect();
        Ok(Tensor::from_op(
            "sub",
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            |ctx| vec![Some(ctx.grad.to_vec()), Some(ctx.grad.iter().map(|&g| -g).collect())],
        ))
    }

    /// Hadamard product.
    pub fn mul(&self, other: &Tensor<T>) -> Result<Tensor<T>> {
        same_shape("mul", self, other)?;
        let data = self.data().iter().zip(other.data()).map(|(&a, &b)| a * b).collect();
        Ok(Tensor::from_op(
            "mul",
            self.shape().to_vec(),
            data,
            vec![self.clone(), other.clone()],
            |ctx| {
                let (a, b) = (&ctx.inputs[0], &ctx.inputs[1]);
                let ga = a
                    .requires_grad()
                    .then(|| ctx.grad.iter().zip(b.data()).map(|(&g, &b)| g * b).collect());
                let gb = b
                    .requires_grad()
                    .then(|| ctx.grad.iter().zip(a.data()).map(|(&g, &a)| g * a).collect());
                vec![ga, gb]
            },
        ))
    }

    pub fn scale(&self, factor: T) -> Tensor<T> {
        let data = self.data().iter().map(|&v| v * factor).collect();
        Tensor::from_op("scale", self.shape().to_vec(), data, vec![self.clone()], move |ctx| {
            vec![Some(ctx.grad.iter().map(|&g| g * factor).collect())]
        })
    }

    pub fn sigmoid(&self) -> Tensor<T> {
        map_unary("sigmoid", self, sigmoid, |_, y| y * (T::one() - y))
    }

    pub fn tanh(&self) -> Tensor<T> {
        map_unary("tanh", self, |v| v.tanh(), |_, y| T::one() - y * y)
    }

    pub fn leaky_relu(&self, slope: T) -> Tensor<T> {
        map_unary(
            "leaky_relu",
            self,
            move |v| if v > T::zero() { v } else { v * slope },
            move |x, _| if x > T::zero() { T::one() } else { slope },
        )
    }

    /// Sum of all values as a scalar (accumulated in double precision).
    pub fn sum(&self) -> Tensor<T> {
        let total: f64 = self.data().iter().map(|v| v.as_f64()).sum();
        let n = self.numel();
        Tensor::from_op(
            "sum",
            vec![],
            vec![T::from_f64(total)],
            vec![self.clone()],
            move |ctx| vec![Some(vec![ctx.grad[0]; n])],
        )
    }

    pub fn mean(&self) -> Tensor<T> {
        let n = self.numel().max(1);
        let total: f64 = self.data().iter().map(|v| v.as_f64()).sum();
        let inv = T::from_f64(1.0 / n as f64);
        Tensor::from_op(
            "mean",
            vec![],
            vec![T::from_f64(total / n as f64)],
            vec![self.clone()],
            move |ctx| vec![Some(vec![ctx.grad[0] * inv; n])],
        )
    }

    /// Contiguous range `[start, start+len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor<T>> {
        let shape = self.shape().to_vec();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(Error::shape(
                "narrow",
                format!("range {start}..{} on axis {axis} of {:?}", start + len, shape),
            ));
        }
        let outer = numel(&shape[..axis]);
        let inner = numel(&shape[axis + 1..]);
        let extent = shape[axis];
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            data.extend_from_slice(&self.data()[base..base + len * inner]);
        }
        let full = self.numel();
        Ok(Tensor::from_op(
            "narrow",
            out_shape,
            data,
            vec![self.clone()],
            move |ctx| {
                let mut g = vec![T::zero(); full];
                for o in 0..outer {
                    let base = (o * extent + start) * inner;
                    g[base..base + len * inner].copy_from_slice(&ctx.grad[o * len * inner..(o + 1) * len * inner]);
                }
                vec![Some(g)]
            },
        ))
    }

    /// Channel range of an NCHW tensor.
    pub fn slice_channels(&self, start: usize, len: usize) -> Result<Tensor<T>> {
        self.expect_rank("slice_channels", 4)?;
        self.narrow(1, start, len)
    }

    /// Nearest-neighbour upsampling of an NCHW tensor by an integer factor.
    pub fn upsample_nearest(&self, factor: usize) -> Result<Tensor<T>> {
        self.expect_rank("upsample_nearest", 4)?;
        if factor == 0 {
            return Err(Error::InvalidArgument("upsampling factor must be at least 1".into()));
        }
        let (n, c, h, w) = (self.shape()[0], self.shape()[1], self.shape()[2], self.shape()[3]);
        let (oh, ow) = (h * factor, w * factor);
        let src = self.data();
        let mut data = vec![T::zero(); n * c * oh * ow];
        for plane in 0..n * c {
            let s = &src[plane * h * w..(plane + 1) * h * w];
            let d = &mut data[plane * oh * ow..(plane + 1) * oh * ow];
            for oy in 0..oh {
                let row = &s[(oy / factor) * w..(oy / factor + 1) * w];
                for (ox, v) in d[oy * ow..(oy + 1) * ow].iter_mut().enumerate() {
                    *v = row[ox / factor];
                }
            }
        }
        Ok(Tensor::from_op(
            "upsample_nearest",
            vec![n, c, oh, ow],
            data,
            vec![self.clone()],
            move |ctx| {
                let mut g = vec![T::zero(); n * c * h * w];
                for plane in 0..n * c {
                    let go = &ctx.grad[plane * oh * ow..(plane + 1) * oh * ow];
                    let gi = &mut g[plane * h * w..(plane + 1) * h * w];
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let i = (oy / factor) * w + ox / factor;
                            gi[i] = gi[i] + go[oy * ow + ox];
                        }
                    }
                }
                vec![Some(g)]
            },
        ))
    }
}

pub(crate) fn sigmoid<T: Element>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Concatenation along `axis`; all other extents must agree.
pub fn concat<T: Element>(parts: &[&Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
    let rank = first.shape().len();
    if axis >= rank {
        return Err(Error::shape(
            "concat",
            format!("axis {axis} out of range for rank {rank}"),
        ));
    }
    for p in parts {
        let ok = p.shape().len() == rank
            && p.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !ok {
            return Err(Error::shape(
                "concat",
                format!(
                    "operand {:?} does not match {:?} outside axis {axis}",
                    p.shape(),
                    first.shape()
                ),
            ));
        }
    }
    let outer = numel(&first.shape()[..axis]);
    let inner = numel(&first.shape()[axis + 1..]);
    let extents: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
    let total: usize = extents.iter().sum();
    let mut out_shape = first.shape().to_vec();
    out_shape[axis] = total;
    let mut data = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for (p, &e) in parts.iter().zip(&extents) {
            data.extend_from_slice(&p.data()[o * e * inner..(o + 1) * e * inner]);
        }
    }
    let inputs: Vec<Tensor<T>> = parts.iter().map(|&p| p.clone()).collect();
    Ok(Tensor::from_op("concat", out_shape, data, inputs, move |ctx| {
        let mut grads: Vec<Vec<T>> = extents.iter().map(|&e| Vec::with_capacity(outer * e * inner)).collect();
        for o in 0..outer {
            let mut offset = o * total * inner;
            for (g, &e) in grads.iter_mut().zip(&extents) {
                g.extend_from_slice(&ctx.grad[offset..offset + e * inner]);
                offset += e * inner;
            }
        }
        grads.into_iter().map(Some).collect()
    }))
}

/// Channel-wise concatenation of NCHW tensors, `a`'s channels first.
pub fn concat_channels<T: Element>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.expect_rank("concat_channels", 4)?;
    b.expect_rank("concat_channels", 4)?;
    concat(&[a, b], 1)
}
