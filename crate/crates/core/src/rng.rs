//! Counter-based noise streams.
//!
//! Each optimizer step `t` of a run draws from its own ChaCha20 stream: the
//! key is expanded from the run seed (`rand_chacha` `seed_from_u64`) and the
//! 64-bit stream id is the step counter. Normal variates use the
//! `rand_distr::StandardNormal` ziggurat sampler. Both crates are pinned to
//! exact versions in `Cargo.toml`; changing either changes every trajectory.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    counter: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, counter: 0 }
    }

    /// Seed for the `run_index`-th member of an ensemble rooted at `base_seed`.
    pub fn derive_seed(base_seed: u64, run_index: u64) -> u64 {
        splitmix64(base_seed ^ splitmix64(run_index.wrapping_add(0x5851_F42D_4C95_7F2D)))
    }

    pub fn derived(base_seed: u64, run_index: u64) -> Self {
        Self::new(Self::derive_seed(base_seed, run_index))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Hands out the generator for the current counter value and advances it.
    pub fn next_step(&mut self) -> StepRng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.counter);
        self.counter += 1;
        StepRng(rng)
    }
}

/// Generator for a single step's draws.
pub struct StepRng(ChaCha20Rng);

impl StepRng {
    pub fn standard_normal(&mut self) -> f64 {
        self.0.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.random::<f64>()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draws(stream: &mut RngStream, n: usize) -> Vec<f64> {
        let mut r = stream.next_step();
        (0..n).map(|_| r.standard_normal()).collect()
    }

    #[test]
    fn same_seed_and_counter_give_same_draws() {
        let mut a = RngStream::new(7);
        let mut b = RngStream::new(7);
        for _ in 0..3 {
            assert_eq!(draws(&mut a, 5), draws(&mut b, 5));
        }
        assert_eq!(a.counter(), 3);
    }

    #[test]
    fn steps_and_seeds_are_distinct() {
        let mut a = RngStream::new(7);
        let first = draws(&mut a, 4);
        let second = draws(&mut a, 4);
        assert_ne!(first, second);
        let mut c = RngStream::new(8);
        assert_ne!(first, draws(&mut c, 4));
        assert_ne!(RngStream::derive_seed(1, 0), RngStream::derive_seed(1, 1));
        assert_ne!(RngStream::derive_seed(1, 0), RngStream::derive_seed(2, 0));
    }

    #[test]
    fn draws_look_standard_normal() {
        let mut s = RngStream::new(11);
        let xs: Vec<f64> = (0..200).flat_map(|_| draws(&mut s, 50)).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
