//! Spatio-temporal (3D) convolution, channel-last.
//! Weights `[C_out][kT][kH][kW][C_in]`; inputs `[N][T][H][W][C_in]`.
//! The kernel may be anisotropic (the discriminator head uses 2x4x4).

use rayon::prelude::*;

use super::params::{BlockId, ParamStore};
use crate::tensor::{Scalar, Tensor};

#[derive(Clone, Debug)]
pub struct Conv3d {
    pub w: BlockId,
    pub b: BlockId,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: [usize; 3],
    pub stride: usize,
    pub pad: usize,
}

impl Conv3d {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore<impl Scalar>,
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: [usize; 3],
        stride: usize,
        pad: usize,
        seed: u64,
        init_std: f64,
    ) -> Self {
        let w = store.add_gaussian(
            &format!("{name}.w"),
            &[out_ch, kernel[0], kernel[1], kernel[2], in_ch],
            seed,
            0.0,
            init_std,
        );
        let b = store.add_gaussian(&format!("{name}.b"), &[out_ch], seed, 0.0, init_std);
        Conv3d {
            w,
            b,
            in_ch,
            out_ch,
            kernel,
            stride,
            pad,
        }
    }

    pub fn out_thw(&self, t: usize, h: usize, w: usize) -> (usize, usize, usize) {
        let f = |x: usize, k: usize| (x + 2 * self.pad - k) / self.stride + 1;
        (
            f(t, self.kernel[0]),
            f(h, self.kernel[1]),
            f(w, self.kernel[2]),
        )
    }

    pub fn forward<F: Scalar>(&self, store: &ParamStore<F>, x: &Tensor<F>) -> Tensor<F> {
        let (n, t, h, w_in, ci) = dims5(x);
        assert_eq!(ci, self.in_ch, "conv3d input channels");
        let (to, ho, wo) = self.out_thw(t, h, w_in);
        let [kt, kh, kw] = self.kernel;
        let (s, p, co_n) = (self.stride, self.pad, self.out_ch);
        let weights = store.data(self.w);
        let bias = store.data(self.b);
        let xd = x.data();

        let mut y = Tensor::zeros(&[n, to, ho, wo, co_n]);
        y.data_mut()
            .par_chunks_mut(wo * co_n)
            .enumerate()
            .for_each(|(row, yrow)| {
                let ni = row / (to * ho);
                let toi = (row / ho) % to;
                let hoi = row % ho;
                for woi in 0..wo {
                    let out = &mut yrow[woi * co_n..(woi + 1) * co_n];
                    out.copy_from_slice(bias);
                    for dt in 0..kt {
                        let ti = (toi * s + dt) as isize - p as isize;
                        if ti < 0 || ti as usize >= t {
                            continue;
                        }
                        for dh in 0..kh {
                            let hi = (hoi * s + dh) as isize - p as isize;
                            if hi < 0 || hi as usize >= h {
                                continue;
                            }
                            for dw in 0..kw {
                                let wi = (woi * s + dw) as isize - p as isize;
                                if wi < 0 || wi as usize >= w_in {
                                    continue;
                                }
                                let xoff = (((ni * t + ti as usize) * h + hi as usize) * w_in
                                    + wi as usize)
                                    * ci;
                                let xrow = &xd[xoff..xoff + ci];
                                for (c, o) in out.iter_mut().enumerate() {
                                    let woff = (((c * kt + dt) * kh + dh) * kw + dw) * ci;
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
        let (n, t, h, w_in, ci) = dims5(x);
        let (_, to, ho, wo, co_n) = dims5(dy);
        let [kt, kh, kw] = self.kernel;
        let (s, p) = (self.stride, self.pad);
        let xd = x.data();
        let dyd = dy.data();

        if !frozen {
            let kvol = kt * kh * kw * ci;
            {
                let dw_all = store.grad_mut(self.w);
                dw_all.par_chunks_mut(kvol).enumerate().for_each(|(c, dwc)| {
                    for ni in 0..n {
                        for toi in 0..to {
                            for hoi in 0..ho {
                                for woi in 0..wo {
                                    let g = dyd
                                        [(((ni * to + toi) * ho + hoi) * wo + woi) * co_n + c];
                                    if g == F::zero() {
                                        continue;
                                    }
                                    for dt in 0..kt {
                                        let ti = (toi * s + dt) as isize - p as isize;
                                        if ti < 0 || ti as usize >= t {
                                            continue;
                                        }
                                        for dh in 0..kh {
                                            let hi = (hoi * s + dh) as isize - p as isize;
                                            if hi < 0 || hi as usize >= h {
                                                continue;
                                            }
                                            for dw in 0..kw {
                                                let wi = (woi * s + dw) as isize - p as isize;
                                                if wi < 0 || wi as usize >= w_in {
                                                    continue;
                                                }
                                                let xoff = (((ni * t + ti as usize) * h
                                                    + hi as usize)
                                                    * w_in
                                                    + wi as usize)
                                                    * ci;
                                                let xrow = &xd[xoff..xoff + ci];
                                                let drow = &mut dwc
                                                    [((dt * kh + dh) * kw + dw) * ci..][..ci];
                                                for i in 0..ci {
                                                    drow[i] += g * xrow[i];
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
            for pos in 0..n * to * ho * wo {
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
        let mut dx = Tensor::zeros(&[n, t, h, w_in, ci]);
        dx.data_mut()
            .par_chunks_mut(w_in * ci)
            .enumerate()
            .for_each(|(row, dxrow)| {
                let ni = row / (t * h);
                let ti = (row / h) % t;
                let hi = row % h;
                for dt in 0..kt {
                    let tnum = ti as isize + p as isize - dt as isize;
                    if tnum < 0 || tnum % s as isize != 0 {
                        continue;
                    }
                    let toi = (tnum / s as isize) as usize;
                    if toi >= to {
                        continue;
                    }
                    for dh in 0..kh {
                        let hnum = hi as isize + p as isize - dh as isize;
                        if hnum < 0 || hnum % s as isize != 0 {
                            continue;
                        }
                        let hoi = (hnum / s as isize) as usize;
                        if hoi >= ho {
                            continue;
                        }
                        for wi in 0..w_in {
                            let dxr = &mut dxrow[wi * ci..(wi + 1) * ci];
                            for dw in 0..kw {
                                let wnum = wi as isize + p as isize - dw as isize;
                                if wnum < 0 || wnum % s as isize != 0 {
                                    continue;
                                }
                                let woi = (wnum / s as isize) as usize;
                                if woi >= wo {
                                    continue;
                                }
                                let dyoff = (((ni * to + toi) * ho + hoi) * wo + woi) * co_n;
                                let dyrow = &dyd[dyoff..dyoff + co_n];
                                for (c, &g) in dyrow.iter().enumerate() {
                                    if g == F::zero() {
                                        continue;
                                    }
                                    let woff = (((c * kt + dt) * kh + dh) * kw + dw) * ci;
                                    let wrow = &weights[woff..woff + ci];
                                    for i in 0..ci {
                                        dxr[i] += g * wrow[i];
                                    }
                                }
                            }
                        }
                    }
                }
            });
        Some(dx)
    }
}

pub(crate) fn dims5<F: Scalar>(t: &Tensor<F>) -> (usize, usize, usize, usize, usize) {
    let s = t.shape();
    assert_eq!(s.len(), 5, "expected 5-d tensor, got {:?}", s);
    (s[0], s[1], s[2], s[3], s[4])
}
