//! Seed derivation.
//!
//! Every random stream in a run is derived from the single master seed by
//! hashing `(master, purpose tag, index)`. Streams for different purposes or
//! epochs are therefore independent of one another and of call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod tag {
    pub const INIT: &str = "init";
    pub const AUGMENT: &str = "augment";
    pub const SUBSAMPLE: &str = "subsample";
    pub const PROBE: &str = "probe";
    pub const PERTURB: &str = "perturb";
    pub const EVAL_VIEWS: &str = "eval-views";
    pub const SBM: &str = "sbm";
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3))
}

pub fn derive_seed(master: u64, purpose: &str, index: u64) -> u64 {
    let h = splitmix64(master ^ splitmix64(fnv1a(purpose.as_bytes())));
    splitmix64(h ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, purpose: &str, index: u64) -> Rng {
    rng_from(derive_seed(master, purpose, index))
}
