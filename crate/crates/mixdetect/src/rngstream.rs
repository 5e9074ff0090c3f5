//! Counter-based random substreams.
//!
//! Every stochastic routine in the crate derives its generator from a
//! `(master_seed, tag, a, b)` tuple fed directly into a ChaCha key, so the
//! stream assigned to a unit of work is a pure function of its identity.
//! Results are bit-identical for any worker count or execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep independent uses of the same master seed apart.
pub const TAG_SIGN_CALIB: u64 = 1;
pub const TAG_SAMPLE_CALIB: u64 = 2;
pub const TAG_TRIAL: u64 = 3;

/// Derive an independent generator from the identity of a unit of work.
pub fn substream(master_seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
