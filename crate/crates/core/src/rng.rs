//! Seed derivation and the generator used throughout.
//!
//! Every random quantity is drawn from a ChaCha stream whose 64-bit seed is
//! derived by hashing `(base seed, purpose tag, index)`. Streams for distinct
//! tags or indices are independent, so replicates can be evaluated in any
//! order or in parallel and still reproduce bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mix an arbitrary sequence of words into one seed.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Seed for the sub-stream `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    mix(&[seed, fnv1a(tag.as_bytes()), index])
}

/// Generator for the sub-stream `(seed, tag, index)`.
pub fn stream(seed: u64, tag: &str, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, tag, index))
}

/// Per-cell seed for a sweep: a hash of the base seed and every grid coordinate.
pub fn cell_seed(base: u64, kind: &str, p: f64, budget: usize, replicate: usize) -> u64 {
    mix(&[
        base,
        fnv1a(kind.as_bytes()),
        p.to_bits(),
        budget as u64,
        replicate as u64,
    ])
}
