//! Seeded random streams.
//!
//! Every stream is ChaCha8 (rand_chacha 0.3.1, pinned) keyed by
//! `(base_seed, episode, substream)`. Floats are built from the top 53 bits of
//! a `u64`, so outputs are bit-identical on every platform.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Substream ids. Each consumer of randomness owns one.
pub mod substream {
    pub const DEMAND: u64 = 1;
    pub const MASK: u64 = 2;
    pub const POLICY: u64 = 3;
    pub const TREE: u64 = 4;
    pub const BUFFER: u64 = 5;
    pub const INIT: u64 = 6;
    pub const BASELINE: u64 = 7;
    pub const TEST: u64 = 99;
}

#[derive(Debug, Clone)]
pub struct Stream {
    inner: ChaCha8Rng,
}

impl Stream {
    pub fn new(base_seed: u64, episode: u64, sub: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&base_seed.to_le_bytes());
        key[8..16].copy_from_slice(&episode.to_le_bytes());
        key[16..24].copy_from_slice(&sub.to_le_bytes());
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`; `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    /// Standard normal via Box-Muller (one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_keyed() {
        let a: Vec<u64> = {
            let mut s = Stream::new(7, 3, substream::DEMAND);
            (0..5).map(|_| s.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut s = Stream::new(7, 3, substream::DEMAND);
            (0..5).map(|_| s.next_u64()).collect()
        };
        assert_eq!(a, b);
        let mut c = Stream::new(7, 3, substream::MASK);
        assert_ne!(a[0], c.next_u64());
        let mut d = Stream::new(7, 4, substream::DEMAND);
        assert_ne!(a[0], d.next_u64());
    }

    #[test]
    fn pinned_first_draw() {
        // Golden value guards against silent generator changes.
        let mut s = Stream::new(0, 0, 0);
        let first = s.next_u64();
        assert_eq!(first, 0xd640_5f89_2fef_003e);
    }

    #[test]
    fn uniform_range_and_normal_moments() {
        let mut s = Stream::new(1, 0, substream::TEST);
        let n = 50_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
            let z = s.normal();
            sum += z;
            sq += z * z;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 4.0 / (n as f64).sqrt());
        assert!((var - 1.0).abs() < 0.05);
    }
}
