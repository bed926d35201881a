//! Deterministic per-entity random streams.
//!
//! Simulation code never shares one RNG across sites: each (master seed,
//! site, segment) triple derives its own ChaCha stream, so results do not
//! depend on scheduling order and any site can be replayed in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 — used only to expand seed material, not as a generator.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a ChaCha8 stream from a master seed and two stream coordinates.
pub fn derive_stream(master: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut state = master ^ 0x6a09_e667_f3bc_c908;
    let mut key = [0u8; 32];
    let words = [
        splitmix64(&mut state) ^ a.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        splitmix64(&mut state) ^ b.wrapping_mul(0xc2b2_ae3d_27d4_eb4f),
        splitmix64(&mut state).wrapping_add(a),
        splitmix64(&mut state).wrapping_add(b),
    ];
    for (i, w) in words.iter().enumerate() {
        let mut s = *w;
        let mixed = splitmix64(&mut s);
        key[i * 8..(i + 1) * 8].copy_from_slice(&mixed.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
