//! Named random sub-streams derived from a single run seed.
//!
//! Every stage of a run draws from its own ChaCha stream, so changing how
//! much randomness one stage consumes never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Building,
    Data,
    Init,
    Shuffle,
    Dropout,
    Ablation,
    Split,
    Augment,
    Walk,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::Building => 1,
            Stream::Data => 2,
            Stream::Init => 3,
            Stream::Shuffle => 4,
            Stream::Dropout => 5,
            Stream::Ablation => 6,
            Stream::Split => 7,
            Stream::Augment => 8,
            Stream::Walk => 9,
        }
    }
}

/// The generator for `stream` under `seed`.
pub fn stream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.id());
    rng
}

/// A child generator of `stream`, indexed by `index` (a tag, a walk, a zone).
pub fn substream(seed: u64, stream: Stream, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(stream.id() | (index.wrapping_add(1) << 8));
    rng
}
