//! Conditional facial-expression video synthesis: a dual-encoder
//! spatio-temporal GAN that maps one neutral 64x64 face image plus a 6-class
//! expression label to a 32-frame video, with training, evaluation metrics
//! (PSNR / SSIM / ACD / ACD-I) and a deterministic synthetic dataset for
//! desk-scale verification.
//!
//! All numerics are implemented in-crate (no ML framework): channel-last
//! tensors, hand-derived backward passes, Adam, and a versioned parameter
//! archive for checkpointing.

pub mod data;
pub mod nn;
pub mod rng;
pub mod tensor;

pub use tensor::{Scalar, Tensor};
