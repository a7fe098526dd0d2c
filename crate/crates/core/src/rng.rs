//! Seeded, splittable random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 stream whose key is
//! derived from a master seed and a path of stream indices. Two runs that
//! derive the same path get the same numbers regardless of how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `seed` and `index`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0xD1B5_4A32_D192_ED03)))
}

/// Derives a seed by folding a whole path of indices into `seed`.
pub fn derive_path(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(seed, |acc, &i| derive_seed(acc, i))
}

/// Opens the random stream identified by `seed`.
pub fn stream(seed: u64) -> StreamRng {
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&derive_seed(seed, k as u64).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
