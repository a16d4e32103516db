//! Counter-based, splittable random number streams.
//!
//! Every random quantity in this crate is drawn from a [`RngStream`]: a
//! ChaCha8 generator keyed by `(seed, stream_id)` with a seekable word
//! position. Identical `(seed, stream_id)` always yields the identical
//! sample sequence regardless of thread scheduling, and distinct stream
//! ids yield statistically independent streams. This is what makes
//! calibration tables, experiments, and sketches reproducible even when
//! built in parallel.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of 32-bit ChaCha words consumed per standard stable draw.
///
/// A draw always consumes exactly two `u64` values (one uniform, one
/// exponential), i.e. four words, so draw `d` of a stream starts at word
/// position `4 * d`. Seeking by counter relies on this stride.
pub const WORDS_PER_DRAW: u128 = 4;

/// Identifies one reproducible random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Generator positioned at draw counter `counter` (each draw spans
    /// [`WORDS_PER_DRAW`] words).
    pub fn rng_at_draw(&self, counter: u64) -> ChaCha8Rng {
        let mut rng = self.rng();
        rng.set_word_pos(counter as u128 * WORDS_PER_DRAW);
        rng
    }
}

/// Uniform draw on the open interval (0, 1).
///
/// The half-offset keeps both endpoints strictly excluded so downstream
/// logs and reciprocals stay finite.
#[inline]
pub fn u01_open(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
}
