//! Reproducible random streams.
//!
//! Every unit of parallel work draws from its own ChaCha stream, addressed by
//! `(run seed, task index)`. ChaCha is counter based, so stream `i` of seed `s`
//! is the same sequence no matter which worker picks the task up or in which
//! order tasks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

/// Generator for task `index` of the run seeded by `seed`.
pub fn task_rng(seed: u64, index: u64) -> TaskRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive a child seed, used when a task itself fans out into sub-runs.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed
        ^ index
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
