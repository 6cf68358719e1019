//! Seeded, order-independent random streams.
//!
//! Every draw in the crate comes from a ChaCha8 generator keyed by the master
//! seed and a `(path, lane)` pair, so a Monte Carlo batch gives the same
//! numbers whether it runs serially or on a thread pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Lane used for the Gaussian drift `V` of an epoched Brownian motion.
pub const DRIFT_LANE: u64 = u64::MAX;
/// Lane used for dataset generation.
pub const DATA_LANE: u64 = u64::MAX - 1;
/// Lane offset for permutation streams.
pub const PERMUTATION_LANE: u64 = 1 << 62;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed record for one sampled object: the master seed and a path index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSeed {
    pub master: u64,
    pub path: u64,
}

impl PathSeed {
    pub fn new(master: u64, path: u64) -> Self {
        Self { master, path }
    }

    /// Generator for one lane (typically an epoch index) of this path.
    pub fn lane(&self, lane: u64) -> ChaCha8Rng {
        stream_rng(self.master, self.path, lane)
    }

    /// A derived seed for a sub-object, e.g. the drift of an EBM built on this path.
    pub fn child(&self, salt: u64) -> PathSeed {
        PathSeed {
            master: splitmix64(self.master ^ splitmix64(salt)),
            path: self.path,
        }
    }
}

/// Generator for `(master, path, lane)`; distinct triples give independent streams.
pub fn stream_rng(master: u64, path: u64, lane: u64) -> ChaCha8Rng {
    let key = splitmix64(master ^ splitmix64(lane.wrapping_add(0x5851_F42D_4C95_7F2D)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(path);
    rng
}
