//! Seeded, platform-independent randomness.
//!
//! Every random choice in the crate draws from a [`SeededRng`]. Parallel work
//! never shares a generator: each job derives its own stream from the parent
//! seed and the job's coordinates, so results do not depend on scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A ChaCha8 stream tagged with the seed it was created from.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A child generator whose seed depends only on this generator's seed and
    /// `coords`, not on how much of this stream has been consumed.
    pub fn derive(&self, coords: &[u64]) -> Self {
        Self::new(derive_seed(self.seed, coords))
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a list of coordinates into a new 64-bit seed.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords
        .iter()
        .fold(splitmix64(base), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(7);
        let mut b = SeededRng::new(7);
        let xs: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.random()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn derive_ignores_consumption() {
        let a = SeededRng::new(11);
        let mut b = SeededRng::new(11);
        let _: u64 = b.random();
        assert_eq!(a.derive(&[1, 2]).seed(), b.derive(&[1, 2]).seed());
        assert_ne!(a.derive(&[1, 2]).seed(), a.derive(&[2, 1]).seed());
    }

    #[test]
    fn stream_is_pinned() {
        // ChaCha8 output is specified bit-for-bit; freezing one value guards
        // against an accidental generator swap.
        let first = SeededRng::new(0).next_u64();
        assert_eq!(first, 13080132717333068652);
        assert_ne!(first, SeededRng::new(1).next_u64());
    }
}
