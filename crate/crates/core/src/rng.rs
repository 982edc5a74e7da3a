//! Reproducible random streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream keyed by the
//! run seed and a fixed stream id, so results do not depend on evaluation
//! order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TRAFFIC_STREAM: u64 = 1;
pub const LAYOUT_STREAM: u64 = 2;
/// Monte-Carlo streams are offset so that trial `i` uses `MC_STREAM_BASE + i`.
pub const MC_STREAM_BASE: u64 = 1 << 32;

/// Stream of the initial layout of restart `r`; restart 0 uses
/// [`LAYOUT_STREAM`].
pub fn layout_stream(r: usize) -> u64 {
    LAYOUT_STREAM + 16 * r as u64
}

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
