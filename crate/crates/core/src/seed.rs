//! Counter-based seed derivation.
//!
//! Every random draw in the crate comes from a stream identified by
//! `(master seed, purpose, trial index, allocation index)`. The child seed is
//! a fixed hash of that tuple, so parallel workers never coordinate and a
//! result never depends on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a random stream is used for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Purpose {
    Train,
    Eval,
    Split,
    CvFolds,
    Fallback,
    Route,
    Synth,
    Custom(u64),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Train => 0x7472_6169_6e00_0001,
            Purpose::Eval => 0x6576_616c_0000_0002,
            Purpose::Split => 0x7370_6c69_7400_0003,
            Purpose::CvFolds => 0x6376_666f_6c64_0004,
            Purpose::Fallback => 0x6661_6c6c_6261_0005,
            Purpose::Route => 0x726f_7574_6500_0006,
            Purpose::Synth => 0x7379_6e74_6800_0007,
            Purpose::Custom(v) => splitmix(v ^ 0x6375_7374_6f6d_0008),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
    pub purpose: Purpose,
    pub trial: u64,
    pub alloc_index: u64,
}

impl SeedSpec {
    pub fn new(master: u64, purpose: Purpose) -> Self {
        SeedSpec {
            master,
            purpose,
            trial: 0,
            alloc_index: 0,
        }
    }

    pub fn stream(master: u64, purpose: Purpose, trial: u64, alloc_index: u64) -> Self {
        SeedSpec {
            master,
            purpose,
            trial,
            alloc_index,
        }
    }

    /// Same master seed, different stream labels.
    pub fn child(&self, purpose: Purpose, trial: u64, alloc_index: u64) -> Self {
        Self::stream(self.master, purpose, trial, alloc_index)
    }

    pub fn derived_seed(&self) -> u64 {
        let mut h = splitmix(self.master);
        for v in [self.purpose.tag(), self.trial, self.alloc_index] {
            h = splitmix(h ^ splitmix(v));
        }
        h
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.derived_seed())
    }
}

/// SplitMix64 finalizer.
fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
