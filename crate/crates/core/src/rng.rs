//! Deterministic hashing and pseudo-randomness.
//!
//! Nothing in this crate draws entropy from the OS. All randomness is derived
//! from an explicit `u64` seed combined with stable identifiers (example ids,
//! pass numbers, group names) through [`fnv1a64`] and [`splitmix64`]. Two
//! consequences the rest of the crate relies on:
//!
//! * the noise attached to an example depends only on `(seed, id)`, never on
//!   input order, shard boundaries, or thread count;
//! * re-running with the same seed reproduces every draw bit-for-bit.

/// FNV-1a 64-bit offset basis.
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
/// FNV-1a 64-bit prime.
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Golden-ratio increment of the splitmix64 generator.
const SPLITMIX_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// FNV-1a 64-bit hash of a byte string.
///
/// Used both for feature bucketing and for folding string ids into seeds.
#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &byte in bytes {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// One step of the splitmix64 output function: advance `x` by the golden
/// gamma and scramble. Equal to the first output of [`SplitMix64::new(x)`].
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    mix(x.wrapping_add(SPLITMIX_GAMMA))
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Splitmix64 stream; a tiny, fast generator that is fully determined by its
/// 64-bit seed. Adequate here: draws are decorrelated per example by seeding,
/// not by consuming one long stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(SPLITMIX_GAMMA);
        mix(self.state)
    }

    /// Uniform draw from `[0, n)` by rejection, avoiding modulo bias.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Uniform draw from the open interval `(0, 1)`; see [`unit_open`].
    #[inline]
    pub fn next_unit_open(&mut self) -> f64 {
        unit_open(self.next_u64())
    }
}

/// Map 64 random bits to a double in the open interval `(0, 1)`.
///
/// The top 53 bits give `u = (m + 1) * 2^-53` in `(0, 1]`; shifting down by
/// `2^-54` re-centres the grid inside the open interval. The upper clamp
/// handles the one input where `1.0 - 2^-54` would round back up to exactly
/// `1.0` (round-to-even), which would otherwise produce an infinite Gumbel
/// variate downstream.
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    const TWO_NEG53: f64 = 1.0 / 9_007_199_254_740_992.0; // 2^-53
    const TWO_NEG54: f64 = TWO_NEG53 / 2.0;
    const MAX_OPEN: f64 = 1.0 - TWO_NEG53;
    let u = ((bits >> 11) + 1) as f64 * TWO_NEG53;
    (u - TWO_NEG54).max(TWO_NEG54).min(MAX_OPEN)
}

/// Standard Gumbel noise for one `(seed, id)` pair.
///
/// `g = -ln(-ln(u))` with `u` drawn from the splitmix64 scramble of
/// `seed XOR fnv1a64(id)`. A pure function: calling it twice, from any
/// thread, in any order, gives the same value.
#[inline]
pub fn gumbel_noise(seed: u64, id: &str) -> f64 {
    let u = unit_open(splitmix64(seed ^ fnv1a64(id.as_bytes())));
    -(-u.ln()).ln()
}

/// Seeded in-place Fisher–Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut SplitMix64) {
    for i in (1..items.len()).rev() {
        let j = rng.below(i as u64 + 1) as usize;
        items.swap(i, j);
    }
}
