//! Scalar-loop reference implementations.

use vln::model::{convlstm_step, ConvLstmState, ConvLstmWeights};
use vln::Tensor;

use super::{random_tensor, rng};

/// Direct 2-D cross-correlation with stride, dilation and symmetric zero
/// padding. `x`: [N, C, H, W], `k`: [O, C, KH, KW].
#[allow(clippy::too_many_arguments)]
pub fn conv_loops(
    x: &[f64],
    xs: [usize; 4],
    k: &[f64],
    ks: [usize; 4],
    bias: Option<&[f64]>,
    stride: usize,
    dilation: usize,
    pad: (usize, usize),
) -> (Vec<f64>, [usize; 4]) {
    let [n, c, h, w] = xs;
    let [o, _, kh, kw] = ks;
    let oh = (h + 2 * pad.0 - (kh - 1) * dilation - 1) / stride + 1;
    let ow = (w + 2 * pad.1 - (kw - 1) * dilation - 1) / stride + 1;
    let mut out = vec![0.0; n * o * oh * ow];
    for b in 0..n {
        for oc in 0..o {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias.map_or(0.0, |bb| bb[oc]);
                    for ic in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky * dilation) as isize - pad.0 as isize;
                                let ix = (ox * stride + kx * dilation) as isize - pad.1 as isize;
                                if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                    continue;
                                }
                                acc += x[((b * c + ic) * h + iy as usize) * w + ix as usize]
                                    * k[((oc * c + ic) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out[((b * o + oc) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    (out, [n, o, oh, ow])
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Conv-LSTM update written out per pixel.
pub fn convlstm_loops(w: &ConvLstmWeights<f64>, z: &Tensor<f64>, state: &ConvLstmState<f64>) -> (Vec<f64>, Vec<f64>) {
    let zs: [usize; 4] = z.shape().try_into().unwrap();
    let hs: [usize; 4] = state.hidden.shape().try_into().unwrap();
    let pre: Vec<Vec<f64>> = (0..4)
        .map(|g| {
            let kz: [usize; 4] = w.w_z[g].shape().try_into().unwrap();
            let kh: [usize; 4] = w.w_h[g].shape().try_into().unwrap();
            let (a, _) = conv_loops(z.data(), zs, w.w_z[g].data(), kz, Some(w.b[g].data()), 1, 1, (1, 1));
            let (b, _) = conv_loops(state.hidden.data(), hs, w.w_h[g].data(), kh, None, 1, 1, (1, 1));
            a.iter().zip(&b).map(|(x, y)| x + y).collect()
        })
        .collect();
    let c_prev = state.cell.data();
    let mut hidden = vec![0.0; c_prev.len()];
    let mut cell = vec![0.0; c_prev.len()];
    for p in 0..c_prev.len() {
        let i = sigmoid(pre[0][p]);
        let f = sigmoid(pre[1][p]);
        let o = sigmoid(pre[2][p]);
        let ct = pre[3][p].tanh();
        cell[p] = ct * i + c_prev[p] * f;
        hidden[p] = o * cell[p].tanh();
    }
    (hidden, cell)
}

/// Max abs difference between `convlstm_step` and the loops on one random
/// case.
pub fn convlstm_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    use rand::Rng;
    let n = r.random_range(1..3);
    let cz = r.random_range(1..4);
    let ch = r.random_range(1..5);
    let h = r.random_range(3..9);
    let wd = r.random_range(3..9);
    let mk = |r: &mut _, s: &[usize]| random_tensor::<f64>(r, s, -1.0, 1.0);
    let weights = ConvLstmWeights {
        w_z: std::array::from_fn(|_| mk(&mut r, &[ch, cz, 3, 3])),
        w_h: std::array::from_fn(|_| mk(&mut r, &[ch, ch, 3, 3])),
        b: std::array::from_fn(|_| mk(&mut r, &[ch])),
    };
    let z = mk(&mut r, &[n, cz, h, wd]);
    let state = ConvLstmState {
        hidden: mk(&mut r, &[n, ch, h, wd]),
        cell: mk(&mut r, &[n, ch, h, wd]),
    };
    let got = convlstm_step(&weights, &z, Some(&state)).unwrap();
    let (hidden, cell) = convlstm_loops(&weights, &z, &state);
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    diff(got.hidden.data(), &hidden).max(diff(got.cell.data(), &cell))
}
