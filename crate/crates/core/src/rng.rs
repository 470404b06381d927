//! Deterministic, platform-stable derivation of named RNG streams from a
//! master seed. Every stochastic choice in the crate draws from a stream
//! keyed by (master seed, purpose tag, indices), so reordering unrelated
//! work never perturbs any other stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a 64-bit key from the master seed, a purpose tag, and indices.
pub(crate) fn derive_key(master: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut state = master;
    let mut key = splitmix64(&mut state);
    for &b in tag.as_bytes() {
        state ^= b as u64;
        key ^= splitmix64(&mut state);
    }
    state ^= tag.len() as u64;
    key ^= splitmix64(&mut state);
    for &i in indices {
        state ^= i;
        key ^= splitmix64(&mut state);
    }
    key
}

/// A seeded ChaCha8 stream for the given purpose.
pub(crate) fn stream(master: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_key(master, tag, indices))
}
