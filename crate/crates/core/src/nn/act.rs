//! Elementwise activations with explicit backward passes.

use crate::tensor::{Scalar, Tensor};

pub fn relu<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
    y
}

/// dx from the forward *input*.
pub fn relu_backward<F: Scalar>(x: &Tensor<F>, dy: &Tensor<F>) -> Tensor<F> {
    let mut dx = dy.clone();
    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
        if xv <= F::zero() {
            *d = F::zero();
        }
    }
    dx
}

pub fn leaky_relu<F: Scalar>(x: &Tensor<F>, slope: f64) -> Tensor<F> {
    let a = F::from_f64(slope);
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < F::zero() {
            *v = *v * a;
        }
    }
    y
}

pub fn leaky_relu_backward<F: Scalar>(x: &Tensor<F>, dy: &Tensor<F>, slope: f64) -> Tensor<F> {
    let a = F::from_f64(slope);
    let mut dx = dy.clone();
    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
        if xv <= F::zero() {
            *d = *d * a;
        }
    }
    dx
}

pub fn tanh<F: Scalar>(x: &Tensor<F>) -> Tensor<F> {
    x.map(|v| v.tanh())
}

/// dx from the forward *output* (`1 - y^2` form).
pub fn tanh_backward<F: Scalar>(y: &Tensor<F>, dy: &Tensor<F>) -> Tensor<F> {
    let mut dx = dy.clone();
    for (d, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
        *d = *d * (F::one() - yv * yv);
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_keeps_sign() {
        let x = Tensor::from_vec(&[4], vec![-2.0f32, -0.5, 0.0, 3.0]);
        let y = leaky_relu(&x, 0.2);
        assert_eq!(y.data(), &[-0.4, -0.1, 0.0, 3.0]);
    }
}
