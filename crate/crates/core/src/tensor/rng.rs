use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;

/// Seeded deterministic generator (ChaCha8).
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        SeededRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for a named sub-stream, e.g. one per epoch or document.
    pub fn derive(&self, stream: u64) -> SeededRng {
        // splitmix64 finalizer over (seed, stream)
        let mut z = self.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeededRng::new(z ^ (z >> 31))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..=hi)
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn uniform_tensor(&mut self, shape: &[usize], lo: f64, hi: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n).map(|_| self.uniform(lo, hi)).collect();
        Tensor::from_parts(shape.to_vec(), data)
    }

    /// 0/1 mask where each entry is kept with probability `keep`.
    pub fn bernoulli_mask(&mut self, shape: &[usize], keep: f64) -> Tensor {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| if self.inner.gen::<f64>() < keep { 1.0 } else { 0.0 })
            .collect();
        Tensor::from_parts(shape.to_vec(), data)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }
}
