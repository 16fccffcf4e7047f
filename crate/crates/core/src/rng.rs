//! Deterministic randomness.
//!
//! Every run has one root seed. Independent streams are carved out of it by
//! counter-based splitting: a purpose tag picks the ChaCha key, the node index
//! picks the stream, and (phase, subphase) picks the word position. Any party
//! holding the root seed can therefore recompute any node's coins for any
//! subphase without replaying the run, which is exactly the access the
//! full-information adversary is granted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep unrelated consumers of the root seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    HamiltonCycles = 1,
    NodeIds = 2,
    Byzantine = 3,
    Colors = 4,
    Adversary = 5,
    Baseline = 6,
    Spectral = 7,
    Trial = 8,
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derive a child seed from a root seed and a tag.
pub fn derive_seed(root: u64, tag: u64) -> u64 {
    splitmix64(root ^ splitmix64(tag.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// A single-purpose generator derived from the root seed.
pub fn purpose_rng(root: u64, purpose: Purpose) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, purpose as u64))
}

/// Per-node, per-phase, per-subphase independent streams.
#[derive(Clone)]
pub struct StreamFamily {
    base: ChaCha8Rng,
}

impl StreamFamily {
    pub fn new(root: u64, purpose: Purpose) -> Self {
        Self {
            base: purpose_rng(root, purpose),
        }
    }

    /// The stream for `node` in subphase `subphase` of phase `phase`.
    ///
    /// Each (phase, subphase) block owns 2^16 words of the node's stream,
    /// far more than any geometric draw consumes.
    pub fn stream(&self, node: usize, phase: u32, subphase: u32) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(node as u64);
        let block = ((phase as u128) << 24) | (subphase as u128 & 0xff_ffff);
        rng.set_word_pos(block << 16);
        rng
    }
}
