//! Seeded, independent random streams for one benchmark instance.
//!
//! Every instance owns a 256-bit ChaCha key derived from its identity. Each
//! consumer (training sample, parity band, model initialization) reads its own
//! ChaCha stream under that key, so adding draws to one consumer never shifts
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream identifiers under an instance key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    TrainSample = 1,
    Band = 2,
    /// Shared by both IQP models so the loss swap starts from the same angles.
    IqpInit = 3,
    IsingInit = 4,
    MaxEntInit = 5,
}

/// SplitMix64 finalizer.
const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 256-bit key for an instance identity.
pub fn instance_key(seed: u64, n: u32, beta: f64) -> [u8; 32] {
    let words = [
        mix64(seed ^ 0x5851_f42d_4c95_7f2d),
        mix64(u64::from(n).wrapping_add(0x9e37_79b9_7f4a_7c15)),
        mix64(beta.to_bits()),
        mix64(seed.rotate_left(17) ^ beta.to_bits().rotate_left(41) ^ u64::from(n)),
    ];
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    key
}

pub fn stream(key: [u8; 32], which: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(which as u64);
    rng
}
