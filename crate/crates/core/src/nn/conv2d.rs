//! 2D convolution, channel-last. Weight layout `[C_out][kH][kW][C_in]` so the
//! innermost accumulation is a contiguous dot product over input channels.

use rayon::prelude::*;

use super::params::{BlockId, ParamStore};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct Conv2d {
    pub w: BlockId,
    pub b: BlockId,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
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
            &[out_ch, kernel, kernel, in_ch],
            seed,
            0.0,
            init_std,
        );
        let b = store.add_gaussian(&format!("{name}.b"), &[out_ch], seed, 0.0, init_std);
        Conv2d {
            w,
            b,
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        }
    }

    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.pad - self.kernel) / self.stride + 1;
        let ow = (w + 2 * self.pad - self.kernel) / self.stride + 1;
        (oh, ow)
    }

    /// x: `[N,H,W,Cin]` -> `[N,Ho,Wo,Cout]`
    pub fn forward<F: Scalar>(&self, store: &ParamStore<F>, x: &Tensor<F>) -> Tensor<F> {
        let (n, h, w_in, ci) = dims4(x);
        assert_eq!(ci, self.in_ch, "conv2d input channels");
        let (ho, wo) = self.out_hw(h, w_in);
        let (k, s, p, co_n) = (self.kernel, self.stride, self.pad, self.out_ch);
        let weights = store.data(self.w);
        let bias = store.data(self.b);
        let xd = x.data();

        let mut y = Tensor::zeros(&[n, ho, wo, co_n]);
        y.data_mut()
            .par_chunks_mut(wo * co_n)
            .enumerate()
            .for_each(|(row, yrow)| {
                let ni = row / ho;
                let hoi = row % ho;
                for woi in 0..wo {
                    let out = &mut yrow[woi * co_n..(woi + 1) * co_n];
                    out.copy_from_slice(bias);
                    for kh in 0..k {
                        let hi = (hoi * s + kh) as isize - p as isize;
                        if hi < 0 || hi as usize >= h {
                            continue;
                        }
                        for kw in 0..k {
                            let wi = (woi * s + kw) as isize - p as isize;
                            if wi < 0 || wi as usize >= w_in {
                                continue;
                            }
                            let xoff = ((ni * h + hi as usize) * w_in + wi as usize) * ci;
                            let xrow = &xd[xoff..xoff + ci];
                            for (c, o) in out.iter_mut().enumerate() {
                                let woff = ((c * k + kh) * k + kw) * ci;
                                let wrow = &weights[woff..woff + ci];
                                let mut acc = F::zero();
                                for i in 0..ci {
                                    acc += wrow[i] * xrow[i];
                                }
                                *o += acc;
                            }
                        }
                    }
                }
            });
        y
    }

    /// Accumulates parameter gradients (unless `frozen`) and returns dx when
    /// requested. `x` must be the forward input, `dy` the output gradient.
    pub fn backward<F: Scalar>(
        &self,
        store: &mut ParamStore<F>,
        x: &Tensor<F>,
        dy: &Tensor<F>,
        need_dx: bool,
        frozen: bool,
    ) -> Option<Tensor<F>> {
        let (n, h, w_in, ci) = dims4(x);
        let (_, ho, wo, co_n) = dims4(dy);
        let (k, s, p) = (self.kernel, self.stride, self.pad);
        let xd = x.data();
        let dyd = dy.data();

        if !frozen {
            // dW: parallel over output channels, each owning its weight slice.
            let kk = k * k * ci;
            {
                let dw = store.grad_mut(self.w);
                dw.par_chunks_mut(kk).enumerate().for_each(|(c, dwc)| {
                    for ni in 0..n {
                        for hoi in 0..ho {
                            for woi in 0..wo {
                                let g = dyd[((ni * ho + hoi) * wo + woi) * co_n + c];
                                if g == F::zero() {
                                    continue;
                                }
                                for kh in 0..k {
                                    let hi = (hoi * s + kh) as isize - p as isize;
                                    if hi < 0 || hi as usize >= h {
                                        continue;
                                    }
                                    for kw in 0..k {
                                        let wi = (woi * s + kw) as isize - p as isize;
                                        if wi < 0 || wi as usize >= w_in {
                                            continue;
                                        }
                                        let xoff =
                                            ((ni * h + hi as usize) * w_in + wi as usize) * ci;
                                        let xrow = &xd[xoff..xoff + ci];
                                        let drow = &mut dwc[(kh * k + kw) * ci..][..ci];
                                        for i in 0..ci {
                                            drow[i] += g * xrow[i];
                                        }
                                    }
                                }
                            }
                        }
                    }
                });
            }
            let db = store.grad_mut(self.b);
            for pos in 0..n * ho * wo {
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
        let mut dx = Tensor::zeros(&[n, h, w_in, ci]);
        dx.data_mut()
            .par_chunks_mut(w_in * ci)
            .enumerate()
            .for_each(|(row, dxrow)| {
                let ni = row / h;
                let hi = row % h;
                for kh in 0..k {
                    // hi = ho*s + kh - p  =>  ho = (hi + p - kh) / s
                    let hnum = hi as isize + p as isize - kh as isize;
                    if hnum < 0 || hnum % s as isize != 0 {
                        continue;
                    }
                    let hoi = (hnum / s as isize) as usize;
                    if hoi >= ho {
                        continue;
                    }
                    for wi in 0..w_in {
                        let dxr = &mut dxrow[wi * ci..(wi + 1) * ci];
                        for kw in 0..k {
                            let wnum = wi as isize + p as isize - kw as isize;
                            if wnum < 0 || wnum % s as isize != 0 {
                                continue;
                            }
                            let woi = (wnum / s as isize) as usize;
                            if woi >= wo {
                                continue;
                            }
                            let dyoff = ((ni * ho + hoi) * wo + woi) * co_n;
                            let dyrow = &dyd[dyoff..dyoff + co_n];
                            for (c, &g) in dyrow.iter().enumerate() {
                                if g == F::zero() {
                                    continue;
                                }
                                let woff = ((c * k + kh) * k + kw) * ci;
                                let wrow = &weights[woff..woff + ci];
                                for i in 0..ci {
                                    dxr[i] += g * wrow[i];
                                }
                            }
                        }
                    }
                }
            });
        Some(dx)
    }
}

pub(crate) fn dims4<F: Scalar>(t: &Tensor<F>) -> (usize, usize, usize, usize) {
    let s = t.shape();
    assert_eq!(s.len(), 4, "expected 4-d tensor, got {:?}", s);
    (s[0], s[1], s[2], s[3])
}
