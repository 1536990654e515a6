//! Seeded random source used by the simulator and the subsampler.
//!
//! The stream is ChaCha20 (20 rounds, 64-bit block counter) keyed with the
//! seed written little-endian into the first 8 key bytes; the other 24 key
//! bytes and the nonce are zero. Derived draws:
//!
//! * `uniform()`: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! * `below(n)`: `floor(uniform() * n)`.
//! * `normal()`: Box–Muller cosine branch, `sqrt(-2 ln(1 - u1)) * cos(2π u2)`,
//!   two uniforms per draw, nothing cached.
//! * `shuffle`: Fisher–Yates from the last position down, `j = below(i + 1)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha20Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        SimRng { inner: ChaCha20Rng::from_seed(key) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut p: Vec<usize> = (0..n).collect();
        self.shuffle(&mut p);
        p
    }
}
