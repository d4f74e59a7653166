//! Deterministic random streams.
//!
//! Every shot draws from its own ChaCha8 stream keyed by the master seed, an
//! experiment id and the shot index, so results do not depend on how shots
//! are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ShotRng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a, used to turn experiment labels into stable ids.
pub fn label_hash(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Mixes a label and a list of integers (point index, input, setting...) into one id.
pub fn stream_id(label: &str, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(label_hash(label)), |acc, &p| splitmix64(acc ^ p))
}

pub fn shot_rng(master: u64, experiment: u64, shot: u64) -> ShotRng {
    let key = splitmix64(splitmix64(master) ^ experiment);
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&splitmix64(key.wrapping_add(i as u64)).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(shot);
    rng
}
