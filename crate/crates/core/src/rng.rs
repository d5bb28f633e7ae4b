//! Deterministic random streams.
//!
//! Every replicate, inner redraw or bootstrap resample draws from its own
//! ChaCha8 stream whose key is a SplitMix64 hash of `(seed, path...)`. Streams
//! never depend on scheduling, so serial and parallel runs agree bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream labels, kept distinct so that unrelated consumers of one seed never
/// share a stream.
pub mod domain {
    pub const CONFIGURATION: u64 = 0x636f_6e66;
    pub const VOLUME_MC: u64 = 0x766d_6373;
    pub const COUPLING: u64 = 0x636f_7570;
    pub const DELTA_OUTER: u64 = 0x646f_7574;
    pub const DELTA_INNER: u64 = 0x6469_6e6e;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of a seed and a path of stream labels.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut state = seed;
    let mut h = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(0xd6e8_feb8_6659_fd93) ^ h;
        h = splitmix64(&mut state);
    }
    h
}

/// Independent generator for `(seed, path)`.
pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    let mut state = derive_seed(seed, path);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
