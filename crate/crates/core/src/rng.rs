//! Reproducible random streams.
//!
//! All randomness flows through [`DamRng`]: xoshiro256** seeded by SplitMix64
//! expansion of a 64-bit seed, with bounded integers drawn by Lemire's
//! multiply-shift rejection. The stream is bit-identical across platforms, so a
//! `(master seed, tag, point, trial)` tuple fully determines every trial.

use rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone)]
pub struct DamRng {
    inner: Xoshiro256StarStar,
}

impl DamRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256StarStar::seed_from_u64(seed),
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform integer in `[0, range)`. `range` must be non-zero.
    #[inline]
    pub fn bounded(&mut self, range: u64) -> u64 {
        debug_assert!(range > 0);
        let mut m = u128::from(self.next_u64()) * u128::from(range);
        let mut low = m as u64;
        if low < range {
            let threshold = range.wrapping_neg() % range;
            while low < threshold {
                m = u128::from(self.next_u64()) * u128::from(range);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    #[inline]
    pub fn index(&mut self, len: usize) -> usize {
        self.bounded(len as u64) as usize
    }

    /// Uniform double in `[0, 1)` from the top 53 bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// `+1` when the top bit of the next output is set, else `-1`.
    #[inline]
    pub fn spin(&mut self) -> i8 {
        if self.next_u64() >> 63 == 1 {
            1
        } else {
            -1
        }
    }

    /// In-place Fisher–Yates shuffle (high index down to 1).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Uniform random permutation of `0..len`, built from the identity.
    pub fn permutation(&mut self, len: usize) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..len).collect();
        self.shuffle(&mut perm);
        perm
    }

    /// `k` distinct elements of `pool` chosen uniformly (partial Fisher–Yates
    /// from the front). Consumes `pool`'s order.
    pub fn choose_distinct<T: Copy>(&mut self, pool: &mut [T], k: usize) -> Vec<T> {
        let k = k.min(pool.len());
        for t in 0..k {
            let j = t + self.index(pool.len() - t);
            pool.swap(t, j);
        }
        pool[..k].to_vec()
    }
}

/// One SplitMix64 output for the given state: advance by the golden gamma, then
/// apply the finalizer.
#[inline]
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| {
        (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Per-trial seed: SplitMix64 of `master ^ fnv1a(tag) ^ point·γ ^ trial`.
///
/// Depends only on its arguments, never on execution order.
pub fn derive_seed(master_seed: u64, tag: &str, point_index: u64, trial_index: u64) -> u64 {
    splitmix64(
        master_seed
            ^ fnv1a64(tag.as_bytes())
            ^ point_index.wrapping_mul(GOLDEN_GAMMA)
            ^ trial_index,
    )
}
