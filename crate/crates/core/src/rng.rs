//! Reproducible per-drop random streams.
//!
//! Every random draw in a campaign comes from a ChaCha stream keyed by
//! `(seed, index, purpose)`. Work items can therefore run in any order or on
//! any number of threads and still see the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    UePosition = 0,
    LosState = 1,
    Toa = 2,
    Clustering = 3,
}

const PURPOSES: u64 = 4;

pub fn stream(seed: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
    rng
}
