//! Seed derivation for independent, reproducible random streams.
//!
//! Every random draw in the pipeline comes from a ChaCha stream keyed by a
//! seed derived from the run's master seed and a short tag path (road index,
//! sample index, ...). Streams never depend on iteration order, so generation
//! can run in parallel and still be bit-reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags. Distinct tags keep unrelated streams from colliding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Road = 1,
    Mass = 2,
    Init = 3,
    Batch = 4,
    EvalWindow = 5,
    EvalNoise = 6,
    TrainNoise = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a stream tag and an index path into a new seed.
pub fn derive(master: u64, stream: Stream, path: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ splitmix64(stream as u64));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, stream: Stream, path: &[u64]) -> Rng {
    rng(derive(master, stream, path))
}
