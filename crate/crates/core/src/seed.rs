//! Counter-based derivation of independent RNG streams.
//!
//! A stream is identified by the master seed plus a path of integers
//! (purpose tag, replicate, site, ...). The path is folded through
//! SplitMix64, so streams do not depend on the order in which they are
//! created and can be generated concurrently.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purpose tags.
pub mod tag {
    pub const SITE_DATA: u64 = 1;
    pub const CALIBRATION: u64 = 2;
    pub const SITE_SAMPLING: u64 = 3;
    pub const CLI: u64 = 4;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `master`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &part| splitmix64(acc ^ splitmix64(part)))
}

/// Generator behind every derived stream.
pub type Stream = ChaCha8Rng;

pub fn stream(master: u64, path: &[u64]) -> Stream {
    Stream::seed_from_u64(derive_seed(master, path))
}
