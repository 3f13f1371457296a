//! Splittable, counter-based random streams.
//!
//! Every consumer of randomness in the crate derives its own independent
//! stream from a root seed plus a static label and a list of integer
//! coordinates (iteration, question, sample slot, ...). Streams are
//! order-independent: collecting rollouts for question 7 before question 3
//! yields the same answers as the reverse order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; good avalanche for cheap stream derivation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a deterministic RNG for the stream identified by
/// `(seed, label, coords)`.
pub fn stream_rng(seed: u64, label: &str, coords: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(seed);
    for byte in label.bytes() {
        state = splitmix64(state ^ u64::from(byte));
    }
    for &c in coords {
        state = splitmix64(state ^ c);
    }
    ChaCha8Rng::seed_from_u64(state)
}
