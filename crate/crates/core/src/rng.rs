//! Seed derivation: one root seed fans out into independent per-purpose
//! ChaCha streams, so enabling one feature never shifts another's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Times = 1,
    Measure = 2,
    FeedForward = 3,
    Oracle = 4,
}

/// Stream for `purpose` at position `index` (e.g. a self-reduction step).
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&index.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose as u64);
    rng
}

/// The streams one sampling round draws from.
#[derive(Clone, Debug)]
pub struct Streams {
    pub times: ChaCha8Rng,
    pub measure: ChaCha8Rng,
    pub feed: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64, index: u64) -> Self {
        Self {
            times: stream(seed, Purpose::Times, index),
            measure: stream(seed, Purpose::Measure, index),
            feed: stream(seed, Purpose::FeedForward, index),
        }
    }
}
