//! Seeded random streams.
//!
//! Every replication owns independent ChaCha streams derived from
//! `(master seed, replication index, purpose)`, so a replication's draws do
//! not depend on which worker runs it or on what other replications do.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Separate purposes keep, e.g., the probe sizes
/// from shifting the arrival draws when the probe count changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Arrivals = 0,
    JobSizes = 1,
    Probes = 2,
}

const PURPOSES: u64 = 3;

#[derive(Debug, Clone)]
pub struct RandomStream(ChaCha8Rng);

impl RandomStream {
    pub fn new(master_seed: u64, replication: u64, purpose: Purpose) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(replication * PURPOSES + purpose as u64);
        RandomStream(rng)
    }

    pub fn from_seed(seed: u64) -> Self {
        RandomStream(ChaCha8Rng::seed_from_u64(seed))
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}
