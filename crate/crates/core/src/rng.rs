//! Seedable random source shared by every generator, split and dropout mask.
//!
//! The stream is fully specified so other implementations can reproduce it:
//!
//! * raw draws are SplitMix64 with `state = seed` (add `0x9E3779B97F4A7C15`,
//!   then the standard two-multiply finaliser);
//! * `uniform()` is `(next_u64() >> 11) * 2^-53`, in `[0, 1)`;
//! * `normal()` is Box–Muller using two uniforms `u1, u2` and returning
//!   `sqrt(-2 ln(1 - u1)) * cos(2π u2)` (one normal per two draws);
//! * `below(n)` is `(next_u64() as u128 * n) >> 64`;
//! * `shuffle` is Fisher–Yates walking `i` from `len - 1` down to `1` and
//!   swapping with `below(i + 1)`;
//! * `DistRng::stream(seed, id)` seeds with `seed + (id + 1) * 0xD1B54A32D192ED03`
//!   (wrapping) for independent sub-streams.

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

const STREAM_MULT: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Clone)]
pub struct DistRng(SplitMix64);

impl DistRng {
    pub fn new(seed: u64) -> Self {
        DistRng(SplitMix64::seed_from_u64(seed))
    }

    pub fn stream(seed: u64, id: u64) -> Self {
        Self::new(seed.wrapping_add(id.wrapping_add(1).wrapping_mul(STREAM_MULT)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    #[inline]
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal_with(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.normal()
    }

    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
