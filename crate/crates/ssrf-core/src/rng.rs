//! Seeded random streams.
//!
//! Every stochastic routine takes an explicit 64-bit seed and derives
//! independent substreams per replicate index, so reruns with the same seed
//! reproduce outputs bit for bit within one build.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

pub struct RandomStream {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Independent substream for a replicate (or permutation) index.
    pub fn substream(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index.wrapping_add(1));
        RandomStream {
            rng,
            spare_normal: None,
        }
    }

    /// Uniform on the open interval (0, 1), 53 usable bits.
    pub fn uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform on [lo, hi).
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform index in [0, n).
    pub fn index(&mut self, n: usize) -> usize {
        (self.rng.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box–Muller; pairs are cached.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = math::sqrt(-2.0 * math::ln(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare_normal = Some(r * math::sin(theta));
        r * math::cos(theta)
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.standard_normal();
        }
    }

    /// Fisher–Yates shuffle of indices 0..n.
    pub fn shuffled_indices(&mut self, n: usize) -> alloc::vec::Vec<usize> {
        let mut idx: alloc::vec::Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (self.rng.next_u64() % (i as u64 + 1)) as usize;
            idx.swap(i, j);
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RandomStream::new(42);
        let mut b = RandomStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.standard_normal().to_bits(), b.standard_normal().to_bits());
        }
    }

    #[test]
    fn substreams_differ() {
        let mut a = RandomStream::substream(42, 0);
        let mut b = RandomStream::substream(42, 1);
        let xa: alloc::vec::Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: alloc::vec::Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xa, xb);
    }

    #[test]
    fn normal_moments() {
        let mut rng = RandomStream::new(7);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = rng.standard_normal();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(math::abs(mean) < 0.01, "mean {mean}");
        assert!(math::abs(var - 1.0) < 0.02, "var {var}");
    }
}
