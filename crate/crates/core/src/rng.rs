//! Seeded random streams.
//!
//! A project owns one seed. Every retrain step draws from its own ChaCha8
//! stream, keyed by the number of labels the step was trained on, so the draws
//! a step consumes do not depend on whether earlier steps were skipped by
//! coalesced asynchronous retraining. The position inside a stream is exposed
//! as an [`RngCursor`] so that persisted states can be checked against replay.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream reserved for random irrelevant-record suggestions before priors exist.
pub const SUGGESTION_STREAM: u64 = u64::MAX;
/// Stream used by the simulator to draw prior knowledge.
pub const PRIOR_STREAM: u64 = u64::MAX - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RngCursor {
    pub stream: u64,
    /// 32-bit words consumed from the stream.
    pub words: u64,
}

#[derive(Debug, Clone)]
pub struct ProjectRng {
    inner: ChaCha8Rng,
}

impl ProjectRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        ProjectRng { inner }
    }

    pub fn at(seed: u64, cursor: RngCursor) -> Self {
        let mut rng = ProjectRng::new(seed, cursor.stream);
        rng.inner.set_word_pos(u128::from(cursor.words));
        rng
    }

    pub fn cursor(&self) -> RngCursor {
        RngCursor {
            stream: self.inner.get_stream(),
            words: self.inner.get_word_pos() as u64,
        }
    }

    /// Uniform index in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "cannot draw from an empty range");
        self.inner.random_range(0..n)
    }

    /// Uniform real in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for ProjectRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
