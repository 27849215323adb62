//! Counter-based random streams.
//!
//! Every offspring draws from its own ChaCha stream selected by
//! `(run seed, evaluation index)`, so the values it sees do not depend on
//! which worker thread evaluates it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream reserved for the coordinator (parent/mate selection).
const COORDINATOR_STREAM: u64 = u64::MAX;

/// RNG for the evaluation with the given global index.
pub fn evaluation_stream(seed: u64, evaluation: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(evaluation);
    rng
}

pub fn coordinator_stream(seed: u64) -> StreamRng {
    evaluation_stream(seed, COORDINATOR_STREAM)
}
