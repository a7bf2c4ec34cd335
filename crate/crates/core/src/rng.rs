//! Deterministic random streams.
//!
//! Every task (a sample, a seed draw, a shuffle) gets its own ChaCha stream
//! derived from the master seed by a counter-based rule:
//! `child = splitmix64(master ^ splitmix64(tag) ^ (index + 1) * GOLDEN)`.
//! Streams are therefore independent of thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the `index`-th child stream of `master` in namespace `tag`.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(tag) ^ index.wrapping_add(1).wrapping_mul(GOLDEN))
}

pub fn stream(master: u64, tag: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, tag, index))
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Namespaces for [`derive_seed`].
pub mod tags {
    pub const SAMPLE: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const AUGMENT: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
}
