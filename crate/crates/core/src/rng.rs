//! Seeded random streams shared by every solver.
//!
//! Sample draws, block draws and snapshot draws come from three independent
//! ChaCha streams keyed by the same seed, so the reference, efficient and
//! stable ADSG forms consume identical sequences regardless of how much
//! work each does between draws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLE_STREAM: u64 = 1;
const BLOCK_STREAM: u64 = 2;
const SNAPSHOT_STREAM: u64 = 3;

#[derive(Debug, Clone)]
pub struct RngStreams {
    seed: u64,
    samples: ChaCha8Rng,
    blocks: ChaCha8Rng,
    snapshots: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            samples: stream(seed, SAMPLE_STREAM),
            blocks: stream(seed, BLOCK_STREAM),
            snapshots: stream(seed, SNAPSHOT_STREAM),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform sample index in `0..n`, with replacement.
    #[inline]
    pub fn sample(&mut self, n: usize) -> usize {
        self.samples.random_range(0..n)
    }

    /// Fills `out` with uniform sample indices (a mini-batch).
    pub fn batch(&mut self, n: usize, out: &mut [usize]) {
        for slot in out {
            *slot = self.samples.random_range(0..n);
        }
    }

    /// Uniform block index in `0..blocks`.
    #[inline]
    pub fn block(&mut self, blocks: usize) -> usize {
        self.blocks.random_range(0..blocks)
    }

    /// Uniform draw in `[0, 1)` from the snapshot stream.
    pub fn snapshot_uniform(&mut self) -> f64 {
        self.snapshots.random::<f64>()
    }
}
