//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator. Monte Carlo trials put the master
//! seed and a sweep key into the 256-bit key and select the ChaCha stream by
//! trial index, so the numbers a trial sees depend only on
//! `(master_seed, sweep_key, trial_index)` and never on scheduling.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::numerics::C64;

#[derive(Debug, Clone)]
pub struct SimRng {
    inner: ChaCha8Rng,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for one Monte Carlo trial. Key bytes 0..8 hold the master seed
    /// and 8..16 the sweep key; the trial index is the ChaCha stream id.
    pub fn for_trial(master_seed: u64, sweep_key: u64, trial_index: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&master_seed.to_le_bytes());
        key[8..16].copy_from_slice(&sweep_key.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(trial_index);
        Self { inner }
    }

    /// Independent child stream keyed by 256 bits drawn from this one.
    pub fn split(&mut self) -> Self {
        let mut key = [0u8; 32];
        self.inner.fill_bytes(&mut key);
        Self {
            inner: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.inner.random::<f64>()
    }

    /// Angle uniform on [0, π].
    pub fn angle(&mut self) -> f64 {
        self.inner.random_range(0.0..=PI)
    }

    /// Phase uniform on [0, 2π).
    pub fn phase(&mut self) -> f64 {
        self.uniform(0.0, 2.0 * PI)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Circularly symmetric complex Gaussian with unit variance.
    pub fn complex_normal(&mut self) -> C64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        C64::new(self.standard_normal() * s, self.standard_normal() * s)
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SimRng::new(7);
        let mut b = SimRng::new(7);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn trial_streams_are_distinct() {
        let mut a = SimRng::for_trial(1, 0, 0);
        let mut b = SimRng::for_trial(1, 0, 1);
        let mut c = SimRng::for_trial(1, 1, 0);
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert!(x != y && y != z && x != z);
        let mut again = SimRng::for_trial(1, 0, 1);
        assert_eq!(again.next_u64(), y);
        // Seed and sweep key occupy separate key bytes.
        assert_ne!(SimRng::for_trial(0, 1, 0).next_u64(), x);
    }

    #[test]
    fn frozen_first_output() {
        // Pins the stream definition; a change here breaks reproducibility of
        // every stored result.
        let mut r = SimRng::for_trial(42, 3, 9);
        let first = r.next_u64();
        assert_eq!(first, 14_528_287_792_162_750_777);
        assert_ne!(first, SimRng::new(42).next_u64());
    }

    #[test]
    fn angle_in_range() {
        let mut r = SimRng::new(3);
        for _ in 0..1000 {
            let a = r.angle();
            assert!((0.0..=PI).contains(&a));
        }
    }
}
