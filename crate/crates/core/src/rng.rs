//! Seeded, stream-split random numbers.
//!
//! Every generator is a ChaCha8 keystream addressed by `(seed, stream)`.
//! Parallel trials use `stream = trial index`; lazily generated array
//! entries use a fixed stream with a per-cell word position, so values
//! never depend on the order in which they are requested.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator for `(seed, stream)`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator positioned at a counter block inside `(seed, stream)`.
///
/// Each counter owns 16 words (one ChaCha block), enough for a handful of draws.
pub fn cell(seed: u64, stream_id: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = stream(seed, stream_id);
    rng.set_word_pos((counter as u128) << 4);
    rng
}

/// Derive an independent child seed; used to hand seeds to sub-experiments.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = stream(seed, tag ^ 0x9e37_79b9_7f4a_7c15);
    rng.random()
}

/// Draw an index with probability proportional to `weights`.
pub fn weighted_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    // rounding: last positive weight
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}
