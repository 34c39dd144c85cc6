//! Seeded counter-based random streams.
//!
//! Every solver owns one [`SolverRng`]; each kind of random draw has its own
//! ChaCha stream so index draws, refresh coins and oracle noise can be
//! replayed independently of each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids within a seed.
pub mod stream {
    pub const XI: u64 = 1;
    pub const ZETA: u64 = 2;
    pub const COIN_W: u64 = 3;
    pub const COIN_W_BAR: u64 = 4;
    pub const NOISE_H: u64 = 5;
    pub const NOISE_G: u64 = 6;
    pub const INIT: u64 = 7;
}

pub fn stream_rng(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

#[derive(Clone, Debug)]
pub struct SolverRng {
    pub xi: ChaCha8Rng,
    pub zeta: ChaCha8Rng,
    pub coin_w: ChaCha8Rng,
    pub coin_w_bar: ChaCha8Rng,
    pub noise_h: ChaCha8Rng,
    pub noise_g: ChaCha8Rng,
}

impl SolverRng {
    pub fn new(seed: u64) -> Self {
        SolverRng {
            xi: stream_rng(seed, stream::XI),
            zeta: stream_rng(seed, stream::ZETA),
            coin_w: stream_rng(seed, stream::COIN_W),
            coin_w_bar: stream_rng(seed, stream::COIN_W_BAR),
            noise_h: stream_rng(seed, stream::NOISE_H),
            noise_g: stream_rng(seed, stream::NOISE_G),
        }
    }
}
