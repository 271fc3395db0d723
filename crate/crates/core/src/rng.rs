//! Seeding rules for reproducible parallel streams.
//!
//! Every stream is a ChaCha8 keystream: the key comes from the root seed and
//! the 64-bit stream id selects an independent counter space, so shard `i`
//! of a run draws the same numbers no matter how many threads execute it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The splitmix64 finalizer, a bijection on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed `mix64(root ^ i)`.
pub fn split_seed(root: u64, i: u64) -> u64 {
    mix64(root ^ i)
}

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
