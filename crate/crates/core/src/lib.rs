pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod inference;
pub mod kernel;
pub mod layers;
pub mod losses;
pub mod optim;
pub mod testkit;
pub mod train;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator for one purpose-specific stream of a run.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
