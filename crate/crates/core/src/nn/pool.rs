//! 2x2/s2 max pooling and bilinear resizing, needed by archived identity
//! backends whose native input size differs from the model's 64x64.

use crate::nn::conv2d::dims4;
use crate::tensor::{Scalar, Tensor};

/// Max pool with square kernel == stride (non-overlapping windows).
pub fn max_pool2d<F: Scalar>(x: &Tensor<F>, k: usize) -> (Tensor<F>, Vec<u32>) {
    let (n, h, w, c) = dims4(x);
    let (ho, wo) = (h / k, w / k);
    let xd = x.data();
    let mut y = Tensor::zeros(&[n, ho, wo, c]);
    let mut argmax = vec![0u32; n * ho * wo * c];
    let yd = y.data_mut();
    for ni in 0..n {
        for hoi in 0..ho {
            for woi in 0..wo {
                let ybase = ((ni * ho + hoi) * wo + woi) * c;
                for ci in 0..c {
                    let mut best = F::neg_infinity();
                    let mut best_pos = 0u32;
                    for dh in 0..k {
                        for dw in 0..k {
                            let hi = hoi * k + dh;
                            let wi = woi * k + dw;
                            let pos = ((ni * h + hi) * w + wi) * c + ci;
                            if xd[pos] > best {
                                best = xd[pos];
                                best_pos = pos as u32;
                            }
                        }
                    }
                    yd[ybase + ci] = best;
                    argmax[ybase + ci] = best_pos;
                }
            }
        }
    }
    (y, argmax)
}

pub fn max_pool2d_backward<F: Scalar>(
    x_shape: &[usize],
    argmax: &[u32],
    dy: &Tensor<F>,
) -> Tensor<F> {
    let mut dx = Tensor::zeros(x_shape);
    let dxd = dx.data_mut();
    for (&pos, &g) in argmax.iter().zip(dy.data()) {
        dxd[pos as usize] += g;
    }
    dx
}

/// Bilinear resize to `out_h x out_w` (half-pixel centers), channel-last.
pub fn resize_bilinear<F: Scalar>(x: &Tensor<F>, out_h: usize, out_w: usize) -> Tensor<F> {
    let (n, h, w, c) = dims4(x);
    if h == out_h && w == out_w {
        return x.clone();
    }
    let xd = x.data();
    let mut y = Tensor::zeros(&[n, out_h, out_w, c]);
    let yd = y.data_mut();
    for ni in 0..n {
        for ho in 0..out_h {
            let (h0, h1, fh) = sample_axis(ho, out_h, h);
            for wo in 0..out_w {
                let (w0, w1, fw) = sample_axis(wo, out_w, w);
                let base = ((ni * out_h + ho) * out_w + wo) * c;
                let p00 = ((ni * h + h0) * w + w0) * c;
                let p01 = ((ni * h + h0) * w + w1) * c;
                let p10 = ((ni * h + h1) * w + w0) * c;
                let p11 = ((ni * h + h1) * w + w1) * c;
                let (wfh, wfw) = (F::from_f64(fh), F::from_f64(fw));
                let one = F::one();
                for ci in 0..c {
                    let top = xd[p00 + ci] * (one - wfw) + xd[p01 + ci] * wfw;
                    let bot = xd[p10 + ci] * (one - wfw) + xd[p11 + ci] * wfw;
                    yd[base + ci] = top * (one - wfh) + bot * wfh;
                }
            }
        }
    }
    y
}

/// Transpose of [`resize_bilinear`].
pub fn resize_bilinear_backward<F: Scalar>(
    x_shape: &[usize],
    dy: &Tensor<F>,
) -> Tensor<F> {
    let (n, h, w, c) = (x_shape[0], x_shape[1], x_shape[2], x_shape[3]);
    let s = dy.shape();
    let (out_h, out_w) = (s[1], s[2]);
    if h == out_h && w == out_w {
        return dy.clone();
    }
    let dyd = dy.data();
    let mut dx = Tensor::zeros(x_shape);
    let dxd = dx.data_mut();
    for ni in 0..n {
        for ho in 0..out_h {
            let (h0, h1, fh) = sample_axis(ho, out_h, h);
            for wo in 0..out_w {
                let (w0, w1, fw) = sample_axis(wo, out_w, w);
                let base = ((ni * out_h + ho) * out_w + wo) * c;
                let p00 = ((ni * h + h0) * w + w0) * c;
                let p01 = ((ni * h + h0) * w + w1) * c;
                let p10 = ((ni * h + h1) * w + w0) * c;
                let p11 = ((ni * h + h1) * w + w1) * c;
                let (wfh, wfw) = (F::from_f64(fh), F::from_f64(fw));
                let one = F::one();
                for ci in 0..c {
                    let g = dyd[base + ci];
                    dxd[p00 + ci] += g * (one - wfh) * (one - wfw);
                    dxd[p01 + ci] += g * (one - wfh) * wfw;
                    dxd[p10 + ci] += g * wfh * (one - wfw);
                    dxd[p11 + ci] += g * wfh * wfw;
                }
            }
        }
    }
    dx
}

/// Half-pixel source sampling: returns bracketing indices and the fraction.
fn sample_axis(o: usize, out_len: usize, in_len: usize) -> (usize, usize, f64) {
    let scale = in_len as f64 / out_len as f64;
    let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (src.floor() as usize).min(in_len - 1);
    let i1 = (i0 + 1).min(in_len - 1);
    (i0, i1, src - i0 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_picks_window_max() {
        let x = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0f32, 4.0, 3.0, 2.0]);
        let (y, arg) = max_pool2d(&x, 2);
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(arg, vec![1]);
    }

    #[test]
    fn resize_identity_when_same_size() {
        let x = Tensor::from_vec(&[1, 2, 2, 1], vec![1.0f32, 2.0, 3.0, 4.0]);
        assert_eq!(resize_bilinear(&x, 2, 2).data(), x.data());
    }
}
