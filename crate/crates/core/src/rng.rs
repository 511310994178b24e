//! Seed derivation. Every random draw descends from one 64-bit root seed
//! through substreams keyed by a stage label and an index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// FNV-1a, stable across platforms and compiler versions.
fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// The seed of substream `(stage, index)` below `root`.
pub fn derive_seed(root: u64, stage: &str, index: u64) -> u64 {
    splitmix(splitmix(root ^ label_hash(stage)) ^ splitmix(index.wrapping_add(1)))
}

pub fn substream(root: u64, stage: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(root, stage, index))
}
