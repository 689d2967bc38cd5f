//! Dense f64 linear algebra, Huber loss, Adam and a finite-difference
//! gradient checker.
//!
//! All randomness goes through [`Rng`] (ChaCha8), seeded explicitly.

mod adam;
mod gradcheck;
mod loss;
mod matrix;

pub use adam::{adam_step, AdamState, DEFAULT_LR};
pub use gradcheck::finite_diff_check;
pub use loss::huber_loss;
pub use matrix::{dropout_mask, Matrix};

/// The crate-wide PRNG: ChaCha with 8 rounds, seeded from a `u64`.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
