//! Versioned uniform-variate stream behind every simulation.
//!
//! The stream is ChaCha8 keyed by `seed_from_u64`, and each variate takes the
//! top 53 bits of one `u64` output. Neither step depends on the platform or on
//! a distribution implementation that could change between crate releases.
//! Any change here must bump [`RNG_VERSION`].

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const RNG_VERSION: &str = "chacha8-u53/v1";

#[derive(Clone, Debug)]
pub struct UniformStream {
    inner: ChaCha8Rng,
}

impl UniformStream {
    pub fn new(seed: u64) -> Self {
        UniformStream {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Next variate in `[0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl Iterator for UniformStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_uniform())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_seed_zero() {
        let draws: Vec<u64> = UniformStream::new(0).take(2).map(f64::to_bits).collect();
        // frozen at first release; a mismatch means traces are no longer reproducible
        assert_eq!(draws, GOLDEN_SEED0);
    }

    const GOLDEN_SEED0: [u64; 2] = [4604562003098661703, 4602064919497455152];

    #[test]
    fn in_unit_interval() {
        assert!(UniformStream::new(42)
            .take(10_000)
            .all(|u| (0.0..1.0).contains(&u)));
    }

    #[test]
    fn seeds_differ() {
        for s in 0..100u64 {
            let a: Vec<f64> = UniformStream::new(s).take(4).collect();
            let b: Vec<f64> = UniformStream::new(s + 1000).take(4).collect();
            assert_ne!(a, b);
        }
    }
}
