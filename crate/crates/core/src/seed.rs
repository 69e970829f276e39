//! Seed derivation.
//!
//! Every random draw in a run is keyed by a seed derived from the master seed
//! and the position of the draw (phase, stage, index), so results do not depend
//! on execution order or on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating the independent random streams of a run.
pub mod tag {
    pub const INIT_POLICY: u64 = 1;
    pub const INIT_ROLLOUT: u64 = 2;
    pub const GENERATOR_INIT: u64 = 3;
    pub const SAMPLE: u64 = 4;
    pub const COMMANDS: u64 = 5;
    pub const PERTURB: u64 = 6;
    pub const ROLLOUT: u64 = 7;
    pub const EVAL: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `master`; distinct part lists give unrelated seeds.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
