//! Fractionally strided (transposed) 3D convolution, channel-last.
//! Weights `[C_in][kT][kH][kW][C_out]` so the forward pass accumulates with
//! contiguous axpy over output channels.
//!
//! Output extent per axis: `(in - 1) * stride - 2 * pad + kernel`.

use rayon::prelude::*;

use super::conv3d::dims5;
use super::params::{BlockId, ParamStore};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct ConvT3d {
    pub w: BlockId,
    pub b: BlockId,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvT3d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore<impl Scalar>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        seed: u64,
        init_std: f64,
    ) -> Self {
        let w = store.add_gaussian(
            &format!("{name}.w"),
            &[in_ch, kernel, kernel, kernel, out_ch],
            seed,
            0.0,
            init_std,
        );
        let b = store.add_gaussian(&format!("{name}.b"), &[out_ch], seed, 0.0, init_std);
        ConvT3d {
            w,
            b,
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        }
    }

    pub fn out_len(&self, x: usize) -> usize {
        (x - 1) * self.stride + self.kernel - 2 * self.pad
    }

    pub fn forward<F: Scalar>(&self, store: &ParamStore<F>, x: &Tensor<F>) -> Tensor<F> {
        let (n, ti_n, hi_n, wi_n, ci) = dims5(x);
        assert_eq!(ci, self.in_ch, "convt3d input channels");
        let (to_n, ho_n, wo_n) = (self.out_len(ti_n), self.out_len(hi_n), self.out_len(wi_n));
        let (k, s, p, co_n) = (self.kernel, self.stride, self.pad, self.out_ch);
        let weights = store.data(self.w);
        let bias = store.data(self.b);
        let xd = x.data();

        let mut y = Tensor::zeros(&[n, to_n, ho_n, wo_n, co_n]);
        y.data_mut()
            .par_chunks_mut(wo_n * co_n)
            .enumerate()
            .for_each(|(row, yrow)| {
                let ni = row / (to_n * ho_n);
                let toi = (row / ho_n) % to_n;
                let hoi = row % ho_n;
                for woi in 0..wo_n {
                    let out = &mut yrow[woi * co_n..(woi + 1) * co_n];
                    out.copy_from_slice(bias);
                    // out[t_o] receives x[t_i] where t_o = t_i*s - p + dt.
                    for dt in 0..k {
                        let tnum = toi as isize + p as isize - dt as isize;
                        if tnum < 0 || tnum % s as isize != 0 {
                            continue;
                        }
                        let ti = (tnum / s as isize) as usize;
                        if ti >= ti_n {
                            continue;
                        }
                        for dh in 0..k {
                            let hnum = hoi as isize + p as isize - dh as isize;
                            if hnum < 0 || hnum % s as isize != 0 {
                                continue;
                            }
                            let hi = (hnum / s as isize) as usize;
                            if hi >= hi_n {
                                continue;
                            }
                            for dw in 0..k {
                                let wnum = woi as isize + p as isize - dw as isize;
                                if wnum < 0 || wnum % s as isize != 0 {
                                    continue;
                                }
                                let wi = (wnum / s as isize) as usize;
                                if wi >= wi_n {
                                    continue;
                                }
                                let xoff =
                                    (((ni * ti_n + ti) * hi_n + hi) * wi_n + wi) * ci;
                                let xrow = &xd[xoff..xoff + ci];
                                let tapoff = ((dt * k + dh) * k + dw) * co_n;
                                for (i, &xv) in xrow.iter().enumerate() {
                                    if xv == F::zero() {
                                        continue;
                                    }
                                    let wrow =
                                        &weights[i * k * k * k * co_n + tapoff..][..co_n];
                                    for (o, &wv) in out.iter_mut().zip(wrow) {
                                        *o += xv * wv;
                                    }
                                }
                            }
                        }
                    }
                }
            });
        y
    }

    pub fn backward<F: Scalar>(
        &self,
        store: &mut ParamStore<F>,
        x: &Tensor<F>,
        dy: &Tensor<F>,
        need_dx: bool,
        frozen: bool,
    ) -> Option<Tensor<F>> {
        let (n, ti_n, hi_n, wi_n, ci) = dims5(x);
        let (_, to_n, ho_n, wo_n, co_n) = dims5(dy);
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        let xd = x.data();
        let dyd = dy.data();

        if !frozen {
            let kvol = k * k * k * co_n;
            {
                // dW[ci, taps, co] += x[.., ci] * dy[.., co]; parallel over ci.
                let dw_all = store.grad_mut(self.w);
                dw_all
                    .par_chunks_mut(kvol)
                    .enumerate()
                    .for_each(|(cin, dwc)| {
                        for ni in 0..n {
                            for ti in 0..ti_n {
                                for hi in 0..hi_n {
                                    for wi in 0..wi_n {
                                        let xv = xd[(((ni * ti_n + ti) * hi_n + hi) * wi_n
                                            + wi)
                                            * ci
                                            + cin];
                                        if xv == F::zero() {
                                            continue;
                                        }
                                        for dt in 0..k {
                                            let to = ti as isize * s as isize - p as isize
                                                + dt as isize;
                                            if to < 0 || to as usize >= to_n {
                                                continue;
                                            }
                                            for dh in 0..k {
                                                let ho = hi as isize * s as isize - p as isize
                                                    + dh as isize;
                                                if ho < 0 || ho as usize >= ho_n {
                                                    continue;
                                                }
                                                for dw in 0..k {
                                                    let wo = wi as isize * s as isize
                                                        - p as isize
                                                        + dw as isize;
                                                    if wo < 0 || wo as usize >= wo_n {
                                                        continue;
                                                    }
                                                    let dyoff = (((ni * to_n + to as usize)
                                                        * ho_n
                                                        + ho as usize)
                                                        * wo_n
                                                        + wo as usize)
                                                        * co_n;
                                                    let dyrow = &dyd[dyoff..dyoff + co_n];
                                                    let drow = &mut dwc[((dt * k + dh) * k
                                                        + dw)
                                                        * co_n..][..co_n];
                                                    for i in 0..co_n {
                                                        drow[i] += xv * dyrow[i];
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    });
            }
            let db = store.grad_mut(self.b);
            for pos in 0..n * to_n * ho_n * wo_n {
                let row = &dyd[pos * co_n..(pos + 1) * co_n];
                for (c, d) in db.iter_mut().enumerate() {
                    *d += row[c];
                }
            }
        }

        if !need_dx {
            return None;
        }
        let weights = store.data(self.w);
        let mut dx = Tensor::zeros(&[n, ti_n, hi_n, wi_n, ci]);
        dx.data_mut()
            .par_chunks_mut(wi_n * ci)
            .enumerate()
            .for_each(|(row, dxrow)| {
                let ni = row / (ti_n * hi_n);
                let ti = (row / hi_n) % ti_n;
                let hi = row % hi_n;
                for dt in 0..k {
                    let to = ti as isize * s as isize - p as isize + dt as isize;
                    if to < 0 || to as usize >= to_n {
                        continue;
                    }
                    for dh in 0..k {
                        let ho = hi as isize * s as isize - p as isize + dh as isize;
                        if ho < 0 || ho as usize >= ho_n {
                            continue;
                        }
                        for wi in 0..wi_n {
                            let dxr = &mut dxrow[wi * ci..(wi + 1) * ci];
                            for dw in 0..k {
                                let wo =
                                    wi as isize * s as isize - p as isize + dw as isize;
                                if wo < 0 || wo as usize >= wo_n {
                                    continue;
                                }
                                let dyoff = (((ni * to_n + to as usize) * ho_n + ho as usize)
                                    * wo_n
                                    + wo as usize)
                                    * co_n;
                                let dyrow = &dyd[dyoff..dyoff + co_n];
                                let tapoff = ((dt * k + dh) * k + dw) * co_n;
                                for (i, d) in dxr.iter_mut().enumerate() {
                                    let wrow =
                                        &weights[i * k * k * k * co_n + tapoff..][..co_n];
                                    let mut acc = F::zero();
                                    for c in 0..co_n {
                                        acc += dyrow[c] * wrow[c];
                                    }
                                    *d += acc;
                                }
                            }
                        }
                    }
                }
            });
        Some(dx)
    }
}
