//! Per-run random streams.
//!
//! Every run owns a handful of ChaCha8 generators keyed by the run seed and
//! separated by stream id. ChaCha is counter-based, so stream `k` of seed `s`
//! is a fixed, independent sequence no matter how many other streams exist or
//! in which order runs are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Logical stream ids. Keep these stable: changing one changes every trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Node capabilities, transmission costs, breakpoint schedule.
    Setup = 0,
    /// Task lengths and complexities.
    Tasks = 1,
    /// Per-node waiting-delay draws.
    Waiting = 2,
    /// Background queue arrivals.
    Background = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
