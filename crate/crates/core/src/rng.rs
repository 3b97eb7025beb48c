//! Seed plumbing. Every randomized operation takes a `&mut SeedRng`; sub-operations
//! get their own stream through [`split`] so results stay reproducible from one seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type SeedRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeedRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent child generator.
pub fn split(rng: &mut SeedRng) -> SeedRng {
    ChaCha8Rng::seed_from_u64(rng.next_u64())
}
