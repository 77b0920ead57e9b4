//! 2-D cross-correlation with stride, dilation and zero padding, lowered to
//! im2col + GEMM per batch element.

use super::{matmul, Element, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Output extent `ceil(input / stride)`; padding split with the odd
    /// pixel on the bottom/right.
    Same,
    /// Symmetric zero padding (rows, cols).
    Explicit(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dOptions {
    pub stride: (usize, usize),
    pub dilation: (usize, usize),
    pub padding: Padding,
}

impl Default for Conv2dOptions {
    fn default() -> Self {
        Conv2dOptions {
            stride: (1, 1),
            dilation: (1, 1),
            padding: Padding::Same,
        }
    }
}

impl Conv2dOptions {
    pub fn stride(mut self, s: usize) -> Self {
        self.stride = (s, s);
        self
    }

    pub fn dilation(mut self, d: usize) -> Self {
        self.dilation = (d, d);
        self
    }

    pub fn padding(mut self, p: Padding) -> Self {
        self.padding = p;
        self
    }
}

/// Output extent and leading pad along one axis.
pub fn conv_output_extent(
    input: usize,
    kernel: usize,
    stride: usize,
    dilation: usize,
    padding: Option<usize>,
) -> Option<(usize, usize)> {
    let span = (kernel - 1) * dilation + 1;
    match padding {
        None => {
            if input == 0 {
                return None;
            }
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + span).saturating_sub(input);
            Some((out, total / 2))
        }
        Some(p) => {
            let padded = input + 2 * p;
            if padded < span {
                return None;
            }
            Some(((padded - span) / stride + 1, p))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    cin: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    dh: usize,
    dw: usize,
    pt: usize,
    pl: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn cols(&self) -> usize {
        self.oh * self.ow
    }

    fn rows(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    /// 1×1, unit stride, no padding: the input plane is already the column
    /// matrix.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.sh == 1 && self.sw == 1 && self.pt == 0 && self.pl == 0
    }

    /// Valid output range `[lo, hi)` along an axis for a tap offset.
    fn valid_range(offset: isize, stride: usize, extent: usize, out: usize) -> (usize, usize) {
        let s = stride as isize;
        let lo = if offset < 0 { ((-offset) + s - 1) / s } else { 0 };
        let last = extent as isize - 1 - offset;
        let hi = if last < 0 { 0 } else { (last / s + 1).min(out as isize) };
        let lo = lo.min(out as isize);
        (lo as usize, hi.max(lo) as usize)
    }

    fn im2col<T: Element>(&self, x: &[T], col: &mut [T]) {
        let cols = self.cols();
        for ci in 0..self.cin {
            let plane = &x[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..self.kh {
                let oy_off = (ki * self.dh) as isize - self.pt as isize;
                let (y_lo, y_hi) = Self::valid_range(oy_off, self.sh, self.h, self.oh);
                for kj in 0..self.kw {
                    let ox_off = (kj * self.dw) as isize - self.pl as isize;
                    let (x_lo, x_hi) = Self::valid_range(ox_off, self.sw, self.w, self.ow);
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let dst = &mut col[row * cols..(row + 1) * cols];
                    dst.fill(T::zero());
                    for oy in y_lo..y_hi {
                        let iy = (oy * self.sh) as isize + oy_off;
                        let src = &plane[iy as usize * self.w..(iy as usize + 1) * self.w];
                        let d = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        if self.sw == 1 {
                            let start = (x_lo as isize + ox_off) as usize;
                            d[x_lo..x_hi].copy_from_slice(&src[start..start + (x_hi - x_lo)]);
                        } else {
                            for ox in x_lo..x_hi {
                                d[ox] = src[((ox * self.sw) as isize + ox_off) as usize];
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im<T: Element>(&self, col: &[T], dx: &mut [T]) {
        let cols = self.cols();
        for ci in 0..self.cin {
            let plane = &mut dx[ci * self.h * self.w..(ci + 1) * self.h * self.w];
            for ki in 0..self.kh {
                let oy_off = (ki * self.dh) as isize - self.pt as isize;
                let (y_lo, y_hi) = Self::valid_range(oy_off, self.sh, self.h, self.oh);
                for kj in 0..self.kw {
                    let ox_off = (kj * self.dw) as isize - self.pl as isize;
                    let (x_lo, x_hi) = Self::valid_range(ox_off, self.sw, self.w, self.ow);
                    let row = (ci * self.kh + ki) * self.kw + kj;
                    let src = &col[row * cols..(row + 1) * cols];
                    for oy in y_lo..y_hi {
                        let iy = ((oy * self.sh) as isize + oy_off) as usize;
                        let s = &src[oy * self.ow..(oy + 1) * self.ow];
                        let d = &mut plane[iy * self.w..(iy + 1) * self.w];
                        for (ox, &v) in s.iter().enumerate().take(x_hi).skip(x_lo) {
                            let ix = ((ox * self.sw) as isize + ox_off) as usize;
                            d[ix] = d[ix] + v;
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `input` [N,Cin,H,W] with `kernel` [Cout,Cin,kh,kw]
/// plus an optional per-output-channel `bias`. Kernel taps are spaced
/// `dilation` apart.
pub fn conv2d<T: Element>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    opts: Conv2dOptions,
) -> Result<Tensor<T>> {
    input.expect_rank("conv2d", 4)?;
    kernel.expect_rank("conv2d", 4)?;
    let (n, cin, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]);
    let (cout, kcin, kh, kw) = (
        kernel.shape()[0],
        kernel.shape()[1],
        kernel.shape()[2],
        kernel.shape()[3],
    );
    if kcin != cin {
        return Err(Error::shape(
            "conv2d",
            format!(
                "input has {cin} channels but kernel {:?} expects {kcin}",
                kernel.shape()
            ),
        ));
    }
    if kh == 0 || kw == 0 || cout == 0 {
        return Err(Error::shape(
            "conv2d",
            format!("degenerate kernel {:?}", kernel.shape()),
        ));
    }
    let (sh, sw) = opts.stride;
    let (dh, dw) = opts.dilation;
    if sh == 0 || sw == 0 || dh == 0 || dw == 0 {
        return Err(Error::InvalidArgument(format!(
            "conv2d stride {:?} and dilation {:?} must be >= 1",
            opts.stride, opts.dilation
        )));
    }
    if let Some(b) = bias {
        if b.shape() != [cout] {
            return Err(Error::shape(
                "conv2d",
                format!("bias {:?} does not match {cout} output channels", b.shape()),
            ));
        }
    }
    let (pad_h, pad_w) = match opts.padding {
        Padding::Same => (None, None),
        Padding::Explicit(ph, pw) => (Some(ph), Some(pw)),
    };
    let (oh, pt) = conv_output_extent(h, kh, sh, dh, pad_h)
        .ok_or_else(|| Error::shape("conv2d", format!("zero-size output rows for input height {h}")))?;
    let (ow, pl) = conv_output_extent(w, kw, sw, dw, pad_w)
        .ok_or_else(|| Error::shape("conv2d", format!("zero-size output cols for input width {w}")))?;
    if oh == 0 || ow == 0 {
        return Err(Error::shape("conv2d", "zero-size spatial output"));
    }
    let geo = Geometry {
        cin,
        h,
        w,
        kh,
        kw,
        sh,
        sw,
        dh,
        dw,
        pt,
        pl,
        oh,
        ow,
    };
    let (rows, cols) = (geo.rows(), geo.cols());
    let in_plane = cin * h * w;
    let out_plane = cout * cols;

    let mut out = vec![T::zero(); n * out_plane];
    let mut col = if geo.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); rows * cols]
    };
    for b in 0..n {
        let x = &input.data()[b * in_plane..(b + 1) * in_plane];
        let y = &mut out[b * out_plane..(b + 1) * out_plane];
        let c: &[T] = if geo.is_pointwise() {
            x
        } else {
            geo.im2col(x, &mut col);
            &col
        };
        matmul(cout, rows, cols, kernel.data(), false, c, false, y, false);
        if let Some(bias) = bias {
            for (co, &bv) in bias.data().iter().enumerate() {
                y[co * cols..(co + 1) * cols].iter_mut().for_each(|v| *v = *v + bv);
            }
        }
    }

    let mut inputs = vec![input.clone(), kernel.clone()];
    if let Some(b) = bias {
        inputs.push(b.clone());
    }
    Ok(Tensor::from_op(
        "conv2d",
        vec![n, cout, oh, ow],
        out,
        inputs,
        move |ctx| {
            let (x, k) = (&ctx.inputs[0], &ctx.inputs[1]);
            let want_x = x.requires_grad();
            let want_k = k.requires_grad();
            let want_b = ctx.inputs.get(2).is_some_and(|b| b.requires_grad());
            let mut dx = want_x.then(|| vec![T::zero(); n * in_plane]);
            let mut dk = want_k.then(|| vec![T::zero(); cout * rows]);
            let mut db = want_b.then(|| vec![T::zero(); cout]);
            let mut col = vec![T::zero(); rows * cols];
            let mut dcol = if want_x {
                vec![T::zero(); rows * cols]
            } else {
                Vec::new()
            };
            for b in 0..n {
                let g = &ctx.grad[b * out_plane..(b + 1) * out_plane];
                let xb = &x.data()[b * in_plane..(b + 1) * in_plane];
                if let Some(dk) = dk.as_mut() {
                    let c: &[T] = if geo.is_pointwise() {
                        xb
                    } else {
                        geo.im2col(xb, &mut col);
                        &col
                    };
                    // dK[cout, rows] += G[cout, cols] · C[rows, cols]^T
                    matmul(cout, cols, rows, g, false, c, true, dk, true);
                }
                if let Some(dx) = dx.as_mut() {
                    let dxb = &mut dx[b * in_plane..(b + 1) * in_plane];
                    if geo.is_pointwise() {
                        matmul(rows, cout, cols, k.data(), true, g, false, dxb, false);
                    } else {
                        matmul(rows, cout, cols, k.data(), true, g, false, &mut dcol, false);
                        geo.col2im(&dcol, dxb);
                    }
                }
                if let Some(db) = db.as_mut() {
                    for (co, d) in db.iter_mut().enumerate() {
                        let s: f64 = g[co * cols..(co + 1) * cols].iter().map(|v| v.as_f64()).sum();
                        *d = *d + T::from_f64(s);
                    }
                }
            }
            let mut grads = vec![dx, dk];
            if ctx.inputs.len() == 3 {
                grads.push(db);
            }
            grads
        },
    ))
}
