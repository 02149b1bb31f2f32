//! Seeded random substreams.
//!
//! Every random draw in the crate goes through a [`Stream`]. A stream is a
//! 64-bit key; child streams are derived from `(key, index)` with a fixed
//! mixing function, so trial `i` of an experiment sees the same numbers no
//! matter which worker runs it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator handed out by [`Stream::rng`].
pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic random substream identified by a 64-bit key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stream(u64);

impl Stream {
    /// Root stream for a master seed.
    pub fn from_seed(seed: u64) -> Self {
        Stream(mix64(seed.wrapping_add(GOLDEN_GAMMA)))
    }

    pub fn key(self) -> u64 {
        self.0
    }

    /// Child stream number `index`. Pure function of `(self, index)`.
    pub fn child(self, index: u64) -> Self {
        let salted = mix64(index.wrapping_mul(GOLDEN_GAMMA).wrapping_add(0x632b_e59b_d9b4_e019));
        Stream(mix64(self.0 ^ salted))
    }

    /// Per-trial substream.
    pub fn trial(self, index: u64) -> Self {
        self.child(index)
    }

    /// Named purpose within a trial (matrix, vector, probe, ...).
    pub fn tagged(self, tag: &str) -> Self {
        // FNV-1a over the tag bytes, then the usual child derivation.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in tag.bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.child(h)
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}
