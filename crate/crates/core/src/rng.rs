//! Seeded random streams.
//!
//! Every randomized operation in this crate draws from a [`ChaCha8Rng`]
//! keyed by a 64-bit seed plus a stream label. Labeling guarantees that
//! two operations given the same seed (say, training-triplet generation
//! and test-triplet sampling) still consume disjoint streams, and that a
//! runner can fan one master seed out into independent substreams
//! (`"data"`, `"triplets"`, `"init"`, `"shuffle"`, `"eval-split"`, ...).
//!
//! Key expansion uses splitmix64 rather than a hasher from std so the
//! byte-level mapping is pinned by this crate, not by a dependency.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mix(seed: u64, label: &str) -> u64 {
    let mut state = seed ^ 0x6c62_272e_07bb_0142;
    let mut acc = splitmix64(&mut state);
    for &byte in label.as_bytes() {
        state ^= u64::from(byte);
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// A deterministic RNG for the given seed and stream label.
pub fn seed_stream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut state = mix(seed, label);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Derive a child seed, used by the runner to hand sub-seeds to operations
/// that take a plain 64-bit seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    mix(seed, label)
}

/// Standard normal draw via Box-Muller, pinned here so initialization is
/// reproducible independent of distribution-crate internals.
pub fn standard_normal(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
