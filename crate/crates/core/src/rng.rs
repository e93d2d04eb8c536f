//! Seeded random streams. Each consumer draws from its own ChaCha stream so
//! adding draws in one subsystem never shifts another's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Copy, Clone, Debug)]
#[repr(u64)]
pub(crate) enum Stream {
    Deployment = 1,
    Attacks = 2,
    Keys = 3,
    Engine = 4,
}

pub(crate) fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
