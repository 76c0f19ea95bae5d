//! Finite-difference checks for every nn kernel's backward pass, in f64.

use fevgan_core::nn::{act, norm, BatchNorm, Conv2d, Conv3d, ConvT3d, Mode, ParamStore};
use fevgan_core::rng::rng_for;
use fevgan_core::tensor::Tensor;
use rand::Rng;

fn rand_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = rng_for(seed, "gradcheck", 0);
    let n = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    Tensor::from_vec(shape, data)
}

/// Loss = sum(w .* y) with fixed pseudo-random weights.
fn probe_loss(y: &Tensor<f64>, seed: u64) -> (f64, Tensor<f64>) {
    let w = rand_tensor(y.shape(), seed);
    let loss: f64 = y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum();
    (loss, w)
}

fn assert_close(analytic: f64, numeric: f64, label: &str) {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    let rel = (analytic - numeric).abs() / denom;
    assert!(
        rel < 1e-5,
        "{label}: analytic {analytic} vs numeric {numeric} (rel {rel})"
    );
}

const H: f64 = 1e-5;

#[test]
fn conv2d_gradients_match_finite_differences() {
    let mut store: ParamStore<f64> = ParamStore::new();
    let conv = Conv2d::new(&mut store, "c", 3, 4, 3, 2, 1, 11, 0.3);
    let x = rand_tensor(&[2, 5, 5, 3], 1);

    let fwd = |store: &ParamStore<f64>, x: &Tensor<f64>| {
        let y = conv.forward(store, x);
        probe_loss(&y, 99).0
    };

    let y = conv.forward(&store, &x);
    let (_, dy) = probe_loss(&y, 99);
    let dx = conv.backward(&mut store, &x, &dy, true, false).unwrap();

    for &(block, label) in &[(conv.w, "dw"), (conv.b, "db")] {
        let n = store.data(block).len();
        for idx in [0usize, n / 3, n - 1] {
            let orig = store.data(block)[idx];
            store.data_mut(block)[idx] = orig + H;
            let lp = fwd(&store, &x);
            store.data_mut(block)[idx] = orig - H;
            let lm = fwd(&store, &x);
            store.data_mut(block)[idx] = orig;
            let num = (lp - lm) / (2.0 * H);
            assert_close(store.grad(block).unwrap()[idx], num, label);
        }
    }
    for idx in [0usize, 37, x.numel() - 1] {
        let mut xp = x.clone();
        xp.data_mut()[idx] += H;
        let lp = fwd(&store, &xp);
        xp.data_mut()[idx] -= 2.0 * H;
        let lm = fwd(&store, &xp);
        let num = (lp - lm) / (2.0 * H);
        assert_close(dx.data()[idx], num, "dx");
    }
}

#[test]
fn conv3d_gradients_match_finite_differences() {
    let mut store: ParamStore<f64> = ParamStore::new();
    let conv = Conv3d::new(&mut store, "c", 2, 3, [3, 3, 3], 2, 1, 12, 0.3);
    let x = rand_tensor(&[1, 4, 5, 5, 2], 2);

    let fwd = |store: &ParamStore<f64>, x: &Tensor<f64>| {
        let y = conv.forward(store, x);
        probe_loss(&y, 98).0
    };

    let y = conv.forward(&store, &x);
    let (_, dy) = probe_loss(&y, 98);
    let dx = conv.backward(&mut store, &x, &dy, true, false).unwrap();

    for &(block, label) in &[(conv.w, "dw"), (conv.b, "db")] {
        let n = store.data(block).len();
        for idx in [0usize, n / 2, n - 1] {
            let orig = store.data(block)[idx];
            store.data_mut(block)[idx] = orig + H;
            let lp = fwd(&store, &x);
            store.data_mut(block)[idx] = orig - H;
            let lm = fwd(&store, &x);
            store.data_mut(block)[idx] = orig;
            assert_close(store.grad(block).unwrap()[idx], (lp - lm) / (2.0 * H), label);
        }
    }
    for idx in [0usize, 53, x.numel() - 1] {
        let mut xp = x.clone();
        xp.data_mut()[idx] += H;
        let lp = fwd(&store, &xp);
        xp.data_mut()[idx] -= 2.0 * H;
        let lm = fwd(&store, &xp);
        assert_close(dx.data()[idx], (lp - lm) / (2.0 * H), "dx");
    }
}

#[test]
fn conv3d_anisotropic_kernel_matches() {
    // Valid head: collapse (2,4,4) to a single logit like the discriminator.
    let mut store: ParamStore<f64> = ParamStore::new();
    let conv = Conv3d::new(&mut store, "c", 3, 1, [2, 4, 4], 1, 0, 13, 0.3);
    let x = rand_tensor(&[2, 2, 4, 4, 3], 3);
    let y = conv.forward(&store, &x);
    assert_eq!(y.shape(), &[2, 1, 1, 1, 1]);

    let (_, dy) = probe_loss(&y, 97);
    let dx = conv.backward(&mut store, &x, &dy, true, false).unwrap();
    let fwd = |store: &ParamStore<f64>, x: &Tensor<f64>| probe_loss(&conv.forward(store, x), 97).0;
    for idx in [0usize, 40, x.numel() - 1] {
        let mut xp = x.clone();
        xp.data_mut()[idx] += H;
        let lp = fwd(&store, &xp);
        xp.data_mut()[idx] -= 2.0 * H;
        let lm = fwd(&store, &xp);
        assert_close(dx.data()[idx], (lp - lm) / (2.0 * H), "dx");
    }
    let n = store.data(conv.w).len();
    for idx in [0usize, n / 2, n - 1] {
        let orig = store.data(conv.w)[idx];
        store.data_mut(conv.w)[idx] = orig + H;
        let lp = fwd(&store, &x);
        store.data_mut(conv.w)[idx] = orig - H;
        let lm = fwd(&store, &x);
        store.data_mut(conv.w)[idx] = orig;
        assert_close(store.grad(conv.w).unwrap()[idx], (lp - lm) / (2.0 * H), "dw");
    }
}

#[test]
fn convt3d_gradients_match_finite_differences() {
    let mut store: ParamStore<f64> = ParamStore::new();
    let conv = ConvT3d::new(&mut store, "c", 3, 2, 4, 2, 1, 14, 0.3);
    let x = rand_tensor(&[1, 2, 3, 3, 3], 4);
    let y = conv.forward(&store, &x);
    assert_eq!(y.shape(), &[1, 4, 6, 6, 2]);

    let fwd = |store: &ParamStore<f64>, x: &Tensor<f64>| probe_loss(&conv.forward(store, x), 96).0;
    let (_, dy) = probe_loss(&y, 96);
    let dx = conv.backward(&mut store, &x, &dy, true, false).unwrap();

    for &(block, label) in &[(conv.w, "dw"), (conv.b, "db")] {
        let n = store.data(block).len();
        for idx in [0usize, n / 2, n - 1] {
            let orig = store.data(block)[idx];
            store.data_mut(block)[idx] = orig + H;
            let lp = fwd(&store, &x);
            store.data_mut(block)[idx] = orig - H;
            let lm = fwd(&store, &x);
            store.data_mut(block)[idx] = orig;
            assert_close(store.grad(block).unwrap()[idx], (lp - lm) / (2.0 * H), label);
        }
    }
    for idx in [0usize, 29, x.numel() - 1] {
        let mut xp = x.clone();
        xp.data_mut()[idx] += H;
        let lp = fwd(&store, &xp);
        xp.data_mut()[idx] -= 2.0 * H;
        let lm = fwd(&store, &xp);
        assert_close(dx.data()[idx], (lp - lm) / (2.0 * H), "dx");
    }
}

#[test]
fn batchnorm_gradients_match_finite_differences() {
    let mut store: ParamStore<f64> = ParamStore::new();
    let bn = BatchNorm::new(&mut store, "bn", 4, 15, 0.1);
    let x = rand_tensor(&[3, 2, 4], 5);

    // Finite differences must re-run the full forward because the batch
    // statistics depend on x; running stats are reset each evaluation.
    let fwd = |store: &ParamStore<f64>, x: &Tensor<f64>| {
        let mut s = store.clone();
        let (y, _) = bn.forward(&mut s, x, Mode::Train);
        probe_loss(&y, 95).0
    };

    let mut fstore = store.clone();
    let (y, cache) = bn.forward(&mut fstore, &x, Mode::Train);
    let (_, dy) = probe_loss(&y, 95);
    let dx = bn.backward(&mut store, &x, &dy, cache.as_ref().unwrap());

    for &(block, label) in &[(bn.gamma, "dgamma"), (bn.beta, "dbeta")] {
        for idx in 0..4 {
            let orig = store.data(block)[idx];
            store.data_mut(block)[idx] = orig + H;
            let lp = fwd(&store, &x);
            store.data_mut(block)[idx] = orig - H;
            let lm = fwd(&store, &x);
            store.data_mut(block)[idx] = orig;
            assert_close(store.grad(block).unwrap()[idx], (lp - lm) / (2.0 * H), label);
        }
    }
    for idx in [0usize, 7, 13, x.numel() - 1] {
        let mut xp = x.clone();
        xp.data_mut()[idx] += H;
        let lp = fwd(&store, &xp);
        xp.data_mut()[idx] -= 2.0 * H;
        let lm = fwd(&store, &xp);
        assert_close(dx.data()[idx], (lp - lm) / (2.0 * H), "dx");
    }
}

#[test]
fn activation_backwards_match() {
    let x = rand_tensor(&[40], 6);
    let (_, dy) = probe_loss(&x, 94);

    let y = act::tanh(&x);
    let dx = act::tanh_backward(&y, &dy);
    for idx in [0usize, 17, 39] {
        let mut xp = x.clone();
        xp.data_mut()[idx] += H;
        let lp: f64 = act::tanh(&xp)
            .data()
            .iter()
            .zip(dy.data())
            .map(|(a, b)| a * b)
            .sum();
        xp.data_mut()[idx] -= 2.0 * H;
        let lm: f64 = act::tanh(&xp)
            .data()
            .iter()
            .zip(dy.data())
            .map(|(a, b)| a * b)
            .sum();
        assert_close(dx.data()[idx], (lp - lm) / (2.0 * H), "tanh dx");
    }

    let dx = act::leaky_relu_backward(&x, &dy, 0.2);
    for idx in [1usize, 20, 38] {
        let mut xp = x.clone();
        xp.data_mut()[idx] += H;
        let lp: f64 = act::leaky_relu(&xp, 0.2)
            .data()
            .iter()
            .zip(dy.data())
            .map(|(a, b)| a * b)
            .sum();
        xp.data_mut()[idx] -= 2.0 * H;
        let lm: f64 = act::leaky_relu(&xp, 0.2)
            .data()
            .iter()
            .zip(dy.data())
            .map(|(a, b)| a * b)
            .sum();
        assert_close(dx.data()[idx], (lp - lm) / (2.0 * H), "lrelu dx");
    }
}

#[test]
fn batchnorm_running_stats_track_batches() {
    let mut store: ParamStore<f64> = ParamStore::new();
    let bn = BatchNorm::new(&mut store, "bn", 2, 16, 0.0);
    let x = Tensor::from_vec(&[4, 2], vec![1.0, 10.0, 3.0, 10.0, 5.0, 10.0, 7.0, 10.0]);
    let (_, _) = bn.forward(&mut store, &x, Mode::Train);
    let rm = store.data(bn.running_mean);
    // 0.9 * 0 + 0.1 * mean([1,3,5,7]) = 0.4
    assert!((rm[0] - 0.4).abs() < 1e-12);
    assert!((rm[1] - 1.0).abs() < 1e-12);
    // Eval mode must use running stats, not batch stats.
    let (y_eval, cache) = bn.forward(&mut store, &x, Mode::Eval);
    assert!(cache.is_none());
    let expected = (1.0 - 0.4) / (0.9 * 1.0 + 0.1 * 5.0 + norm::BN_EPS).sqrt();
    assert!((y_eval.data()[0] - expected).abs() < 1e-9);
}
