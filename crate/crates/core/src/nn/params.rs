//! Named parameter blocks with gradient buffers.
//!
//! Trainable networks allocate their blocks in a [`ParamStore`]; the frozen
//! identity backend keeps its weights in its own private store, so no
//! optimizer can ever reach them.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::rng_for;
use crate::tensor::Scalar;

/// Handle to a block inside one store. Not transferable between stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BlockId(pub(crate) usize);

#[derive(Clone, Debug)]
pub struct Block<F: Scalar> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<F>,
    pub grad: Vec<F>,
}

impl<F: Scalar> Block<F> {
    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParamStore<F: Scalar> {
    blocks: Vec<Block<F>>,
    index: HashMap<String, BlockId>,
}

/// Chunk length for parallel deterministic initialization. Each chunk draws
/// from its own derived stream, so results do not depend on thread count.
const INIT_CHUNK: usize = 1 << 16;

/// Fills `data` with `mean + std * N(0,1)` deterministically from `seed`/`domain`.
pub fn fill_gaussian<F: Scalar>(data: &mut [F], seed: u64, domain: &str, mean: f64, std: f64) {
    data.par_chunks_mut(INIT_CHUNK)
        .enumerate()
        .for_each(|(chunk_idx, chunk)| {
            let mut rng = rng_for(seed, domain, chunk_idx as u64);
            for x in chunk.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x = F::from_f64(mean + std * z);
            }
        });
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore {
            blocks: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, shape: &[usize], data: Vec<F>) -> BlockId {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter block {name}"
        );
        let id = BlockId(self.blocks.len());
        self.blocks.push(Block {
            name: name.to_string(),
            shape: shape.to_vec(),
            data,
            grad: Vec::new(),
        });
        self.index.insert(name.to_string(), id);
        id
    }

    /// Adds a block initialized from `N(mean, std^2)` using the store-external
    /// seed and the block name as the stream domain.
    pub fn add_gaussian(
        &mut self,
        name: &str,
        shape: &[usize],
        seed: u64,
        mean: f64,
        std: f64,
    ) -> BlockId {
        let numel = shape.iter().product::<usize>();
        let mut data = vec![F::zero(); numel];
        fill_gaussian(&mut data, seed, name, mean, std);
        self.add(name, shape, data)
    }

    pub fn add_const(&mut self, name: &str, shape: &[usize], value: F) -> BlockId {
        let numel = shape.iter().product::<usize>();
        self.add(name, shape, vec![value; numel])
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn lookup(&self, name: &str) -> Option<BlockId> {
        self.index.get(name).copied()
    }

    pub fn block(&self, id: BlockId) -> &Block<F> {
        &self.blocks[id.0]
    }

    pub fn block_mut(&mut self, id: BlockId) -> &mut Block<F> {
        &mut self.blocks[id.0]
    }

    pub fn data(&self, id: BlockId) -> &[F] {
        &self.blocks[id.0].data
    }

    pub fn data_mut(&mut self, id: BlockId) -> &mut [F] {
        &mut self.blocks[id.0].data
    }

    /// Gradient buffer, allocated on first use.
    pub fn grad_mut(&mut self, id: BlockId) -> &mut [F] {
        let b = &mut self.blocks[id.0];
        if b.grad.len() != b.data.len() {
            b.grad = vec![F::zero(); b.data.len()];
        }
        &mut b.grad
    }

    pub fn grad(&self, id: BlockId) -> Option<&[F]> {
        let b = &self.blocks[id.0];
        if b.grad.len() == b.data.len() {
            Some(&b.grad)
        } else {
            None
        }
    }

    pub fn zero_grads(&mut self) {
        for b in &mut self.blocks {
            for g in &mut b.grad {
                *g = F::zero();
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (BlockId, &Block<F>)> {
        self.blocks.iter().enumerate().map(|(i, b)| (BlockId(i), b))
    }

    pub fn ids(&self) -> Vec<BlockId> {
        (0..self.blocks.len()).map(BlockId).collect()
    }

    /// Splits mutable access into (data, grad) of one block; both lazily sized.
    pub fn data_and_grad_mut(&mut self, id: BlockId) -> (&mut [F], &mut [F]) {
        let b = &mut self.blocks[id.0];
        if b.grad.len() != b.data.len() {
            b.grad = vec![F::zero(); b.data.len()];
        }
        (&mut b.data, &mut b.grad)
    }
}

impl ParamStore<f32> {
    /// Casts every block (data only) to f64, preserving names and shapes.
    pub fn to_f64(&self) -> ParamStore<f64> {
        let mut out = ParamStore::new();
        for b in &self.blocks {
            out.add(
                &b.name,
                &b.shape,
                b.data.iter().map(|&x| x as f64).collect(),
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_init_is_deterministic_and_chunk_stable() {
        let mut a = vec![0.0f32; 200_000];
        let mut b = vec![0.0f32; 200_000];
        fill_gaussian(&mut a, 42, "w", 0.0, 0.01);
        fill_gaussian(&mut b, 42, "w", 0.0, 0.01);
        assert_eq!(a, b);
        let mean: f64 = a.iter().map(|&x| x as f64).sum::<f64>() / a.len() as f64;
        let var: f64 =
            a.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / a.len() as f64;
        assert!(mean.abs() < 1e-4);
        assert!((var.sqrt() - 0.01).abs() < 5e-4);
    }

    #[test]
    fn grad_buffers_are_lazy() {
        let mut store: ParamStore<f32> = ParamStore::new();
        let id = store.add_const("b", &[4], 0.0);
        assert!(store.grad(id).is_none());
        store.grad_mut(id)[0] = 1.0;
        assert_eq!(store.grad(id).unwrap()[0], 1.0);
    }
}
