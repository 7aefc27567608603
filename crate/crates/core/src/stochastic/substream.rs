//! Counter-based substream derivation.
//!
//! Samplers for different sequence indices must behave like independent
//! probability spaces, and replicates within a stream must be independent
//! of each other and of evaluation order. Both are obtained by hashing
//! `(seed, index)` and `(stream, replicate)` through splitmix64 and seeding
//! a fresh ChaCha8 generator per replicate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a label into a seed; chaining calls derives nested streams.
pub fn mix(seed: u64, label: u64) -> u64 {
    splitmix64(seed ^ splitmix64(label.wrapping_add(0x51ed_270b_9f0f_afe5)))
}

/// Stream for one sequence index.
pub fn index_stream(seed: u64, index: usize) -> u64 {
    mix(seed, index as u64)
}

/// Fresh generator for one replicate of one stream.
pub fn replicate_rng(stream: u64, replicate: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(stream, replicate))
}
