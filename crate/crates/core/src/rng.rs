//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 generator keyed by a
//! user seed, with the 64-bit stream id selecting an independent substream.
//! Replication `r` of an experiment seeded with `s` uses `SeedStream { seed: s,
//! stream: r }`, so replications can run in any order or in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedStream {
    pub seed: u64,
    #[serde(default)]
    pub stream: u64,
}

impl SeedStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for SeedStream {
    fn from(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }
}
