//! Seeded random streams.
//!
//! Each pipeline stage draws from its own ChaCha8 stream derived from the
//! experiment seed, so adding draws to one stage never shifts another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream identifiers, one per stochastic stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Cap = 1,
    Undersample = 2,
    Smote = 3,
    Split = 4,
    Forest = 5,
    Boosting = 6,
    NeuralInit = 7,
    NeuralShuffle = 8,
    Synth = 9,
    Subsample = 10,
}

pub fn stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Sub-stream `index` of a stage, e.g. one per tree.
pub fn substream(seed: u64, stage: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stage as u64);
    rng
}

/// Chooses `k` of `0..n` without replacement by a partial Fisher–Yates pass and
/// returns them in ascending order.
pub fn sample_sorted<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let k = k.min(n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool.sort_unstable();
    pool
}

/// Full Fisher–Yates shuffle of `0..n`.
pub fn permutation<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    order
}
