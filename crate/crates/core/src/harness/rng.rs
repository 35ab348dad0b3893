//! Seeding scheme. Every random draw comes from ChaCha8 seeded with the run
//! seed and a fixed stream number per purpose, so extra draws for one purpose
//! never shift another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Weight initialization.
    Init = 1,
    /// Minibatch order.
    Shuffle = 2,
    /// Dataset generation and the train/validation split.
    Data = 3,
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}
