//! Named random streams.
//!
//! Every consumer of randomness in a run draws from its own ChaCha stream
//! derived from the run seed. Streams never share state, so e.g. replaying a
//! sequence (which performs no scoring) still sees the same dropout masks as
//! the run that recorded it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Schedule = 2,
    UniformScores = 3,
    Dropout = 4,
    Bald = 5,
    Synth = 6,
    LabelNoise = 7,
    WhiteNoise = 8,
    Split = 9,
    Irreducible = 10,
}

pub fn stream(seed: u64, which: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// A fresh seed derived from `seed` for a separate sub-run (e.g. the
/// irreducible-loss model), so that it does not share streams with the main run.
pub fn derive_seed(seed: u64, which: Stream) -> u64 {
    use rand::RngCore;
    stream(seed, which).next_u64()
}
