//! Minimal neural-network kernels: parameter store, convolutions, batch
//! normalization, activations. Forward and backward passes are hand-derived;
//! `tests/gradcheck.rs` verifies every kernel against central finite
//! differences in f64.

pub mod act;
pub mod conv2d;
pub mod conv3d;
pub mod convt3d;
pub mod norm;
pub mod params;
pub mod pool;

pub use conv2d::Conv2d;
pub use conv3d::Conv3d;
pub use convt3d::ConvT3d;
pub use norm::{BatchNorm, BnCache, Mode};
pub use params::{Block, BlockId, ParamStore};
