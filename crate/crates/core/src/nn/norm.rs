//! Batch normalization over the channel-last axis.
//!
//! Works for any leading layout (`[N,H,W,C]`, `[N,T,H,W,C]`) by flattening to
//! `[M,C]`. Training mode normalizes with batch statistics and updates the
//! running estimates (decay 0.9); evaluation mode uses the stored running
//! statistics. Statistics accumulate in f64 with a fixed order, so results do
//! not depend on thread count.

use super::params::{BlockId, ParamStore};
use crate::tensor::{Scalar, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: BlockId,
    pub beta: BlockId,
    pub running_mean: BlockId,
    pub running_var: BlockId,
    pub channels: usize,
}

/// Per-channel statistics captured during a training-mode forward pass.
pub struct BnCache {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl BatchNorm {
    /// Scale is drawn around 1 (a zero-centered scale would silence the layer
    /// at initialization), shift around 0; both use the configured init std.
    pub fn new(
        store: &mut ParamStore<impl Scalar>,
        name: &str,
        channels: usize,
        seed: u64,
        init_std: f64,
    ) -> Self {
        let gamma = store.add_gaussian(&format!("{name}.gamma"), &[channels], seed, 1.0, init_std);
        let beta = store.add_gaussian(&format!("{name}.beta"), &[channels], seed, 0.0, init_std);
        let running_mean = store.add_const(&format!("{name}.running_mean"), &[channels], {
            num_traits::Zero::zero()
        });
        let running_var = store.add_const(&format!("{name}.running_var"), &[channels], {
            num_traits::One::one()
        });
        BatchNorm {
            gamma,
            beta,
            running_mean,
            running_var,
            channels,
        }
    }

    /// Trainable blocks (the running statistics are state, not parameters).
    pub fn trainable(&self) -> [BlockId; 2] {
        [self.gamma, self.beta]
    }

    pub fn forward<F: Scalar>(
        &self,
        store: &mut ParamStore<F>,
        x: &Tensor<F>,
        mode: Mode,
    ) -> (Tensor<F>, Option<BnCache>) {
        let c = self.channels;
        assert_eq!(*x.shape().last().unwrap(), c, "batchnorm channels");
        let m = x.numel() / c;
        let xd = x.data();

        let (mean, var) = match mode {
            Mode::Train => {
                let mut sum = vec![0.0f64; c];
                let mut sumsq = vec![0.0f64; c];
                for row in xd.chunks_exact(c) {
                    for (i, &v) in row.iter().enumerate() {
                        let v = v.as_f64();
                        sum[i] += v;
                        sumsq[i] += v * v;
                    }
                }
                let mean: Vec<f64> = sum.iter().map(|s| s / m as f64).collect();
                let var: Vec<f64> = sumsq
                    .iter()
                    .zip(&mean)
                    .map(|(sq, mu)| (sq / m as f64 - mu * mu).max(0.0))
                    .collect();
                // Update running statistics.
                {
                    let rm = store.data_mut(self.running_mean);
                    for (r, &mu) in rm.iter_mut().zip(&mean) {
                        *r = F::from_f64(BN_MOMENTUM * r.as_f64() + (1.0 - BN_MOMENTUM) * mu);
                    }
                }
                {
                    let rv = store.data_mut(self.running_var);
                    for (r, &v) in rv.iter_mut().zip(&var) {
                        *r = F::from_f64(BN_MOMENTUM * r.as_f64() + (1.0 - BN_MOMENTUM) * v);
                    }
                }
                (mean, var)
            }
            Mode::Eval => {
                let mean: Vec<f64> = store.data(self.running_mean).iter().map(|v| v.as_f64()).collect();
                let var: Vec<f64> = store.data(self.running_var).iter().map(|v| v.as_f64()).collect();
                (mean, var)
            }
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();

        let gamma: Vec<f64> = store.data(self.gamma).iter().map(|v| v.as_f64()).collect();
        let beta: Vec<f64> = store.data(self.beta).iter().map(|v| v.as_f64()).collect();
        let scale: Vec<F> = (0..c)
            .map(|i| F::from_f64(gamma[i] * inv_std[i]))
            .collect();
        let shift: Vec<F> = (0..c)
            .map(|i| F::from_f64(beta[i] - gamma[i] * inv_std[i] * mean[i]))
            .collect();

        let mut y = Tensor::zeros(x.shape());
        for (yrow, xrow) in y.data_mut().chunks_exact_mut(c).zip(xd.chunks_exact(c)) {
            for i in 0..c {
                yrow[i] = xrow[i] * scale[i] + shift[i];
            }
        }
        let cache = match mode {
            Mode::Train => Some(BnCache { mean, inv_std }),
            Mode::Eval => None,
        };
        (y, cache)
    }

    /// Training-mode backward. Accumulates dgamma/dbeta and returns dx.
    pub fn backward<F: Scalar>(
        &self,
        store: &mut ParamStore<F>,
        x: &Tensor<F>,
        dy: &Tensor<F>,
        cache: &BnCache,
    ) -> Tensor<F> {
        let c = self.channels;
        let m = x.numel() / c;
        let xd = x.data();
        let dyd = dy.data();

        // Reductions: sum(dy), sum(dy * xhat) per channel.
        let mut sum_dy = vec![0.0f64; c];
        let mut sum_dy_xhat = vec![0.0f64; c];
        for (xrow, dyrow) in xd.chunks_exact(c).zip(dyd.chunks_exact(c)) {
            for i in 0..c {
                let xhat = (xrow[i].as_f64() - cache.mean[i]) * cache.inv_std[i];
                let g = dyrow[i].as_f64();
                sum_dy[i] += g;
                sum_dy_xhat[i] += g * xhat;
            }
        }

        {
            let dgamma = store.grad_mut(self.gamma);
            for (d, &s) in dgamma.iter_mut().zip(&sum_dy_xhat) {
                *d += F::from_f64(s);
            }
        }
        {
            let dbeta = store.grad_mut(self.beta);
            for (d, &s) in dbeta.iter_mut().zip(&sum_dy) {
                *d += F::from_f64(s);
            }
        }

        let gamma: Vec<f64> = store.data(self.gamma).iter().map(|v| v.as_f64()).collect();
        let mf = m as f64;
        let mut dx = Tensor::zeros(x.shape());
        for ((dxrow, xrow), dyrow) in dx
            .data_mut()
            .chunks_exact_mut(c)
            .zip(xd.chunks_exact(c))
            .zip(dyd.chunks_exact(c))
        {
            for i in 0..c {
                let xhat = (xrow[i].as_f64() - cache.mean[i]) * cache.inv_std[i];
                let g = dyrow[i].as_f64();
                let v = gamma[i] * cache.inv_std[i]
                    * (g - sum_dy[i] / mf - xhat * sum_dy_xhat[i] / mf);
                dxrow[i] = F::from_f64(v);
            }
        }
        dx
    }
}
