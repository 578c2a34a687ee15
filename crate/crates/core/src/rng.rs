//! Counter-based pseudorandom numbers.
//!
//! Every draw is a pure function of `(key, stream, counter)`, so results do not
//! depend on evaluation order and any draw can be reproduced in isolation.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash an arbitrary list of words into one well-mixed key.
pub fn derive_key(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &w| mix64(acc ^ mix64(w.wrapping_add(GOLDEN))))
}

/// A keyed counter-based generator. Cheap to copy; `at` never mutates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key: mix64(key ^ GOLDEN) }
    }

    pub fn keyed(words: &[u64]) -> Self {
        Self::new(derive_key(words))
    }

    /// Sub-generator for an independent stream.
    pub fn fork(&self, stream: u64) -> Self {
        Self { key: mix64(self.key ^ mix64(stream.wrapping_mul(GOLDEN).wrapping_add(1))) }
    }

    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix64(self.key.wrapping_add(mix64(counter.wrapping_add(GOLDEN))))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn uniform_range_at(&self, counter: u64, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform_at(counter)
    }

    /// Standard normal draw (Box-Muller on two sub-counters).
    #[inline]
    pub fn normal_at(&self, counter: u64) -> f64 {
        let u1 = 1.0 - self.uniform_at(counter.wrapping_mul(2));
        let u2 = self.uniform_at(counter.wrapping_mul(2).wrapping_add(1));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Integer in `0..n`.
    #[inline]
    pub fn below_at(&self, counter: u64, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.u64_at(counter) as u128 * n as u128) >> 64) as u64
    }
}

/// Deterministic Fisher-Yates shuffle driven by a counter generator.
pub fn shuffle<T>(items: &mut [T], rng: &CounterRng) {
    for i in (1..items.len()).rev() {
        let j = rng.below_at(i as u64, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
