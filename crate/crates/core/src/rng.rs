//! Per-trial random streams.
//!
//! Every trial owns a xoshiro256++ generator whose seed is a pure function of
//! `(master_seed, trial_index)`, so trials can run in any order, on any number
//! of threads, and still replay bit for bit.
//!
//! Draw order inside one engine step is fixed:
//! 1. exponential holding time,
//! 2. uniform in `[0, 1)` deciding birth versus death,
//! 3. one integer selecting the parent (birth) or victim type (death),
//! 4. the mutation Bernoulli, only when `0 < r < 1`.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

/// The generator used by every simulation in this crate.
pub type TrialRng = Xoshiro256PlusPlus;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. A bijection on `u64` with full avalanche.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a seed with an index. Injective in each argument when the other
/// is held fixed.
#[inline]
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(GOLDEN_GAMMA)))
}

/// Seed provenance of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngContract {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl RngContract {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        RngContract {
            master_seed,
            trial_index,
        }
    }

    pub fn rng(&self) -> TrialRng {
        derive_trial_rng(self.master_seed, self.trial_index)
    }
}

/// Generator for trial `trial_index` of an experiment seeded with `master_seed`.
pub fn derive_trial_rng(master_seed: u64, trial_index: u64) -> TrialRng {
    TrialRng::seed_from_u64(mix_seed(master_seed, trial_index))
}
