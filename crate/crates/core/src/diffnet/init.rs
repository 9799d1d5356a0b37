use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Uniform Xavier/Glorot initialization of a `(fan_out, fan_in)` matrix,
/// deterministic in `seed`.
pub fn xavier_init(shape: (usize, usize), seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    xavier_init_with(shape, &mut rng)
}

pub fn xavier_init_with<R: Rng>(shape: (usize, usize), rng: &mut R) -> Result<Vec<f64>> {
    let (rows, cols) = shape;
    if rows == 0 || cols == 0 {
        return Err(Error::contract(format!("xavier_init on empty shape {shape:?}")));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Ok((0..rows * cols).map(|_| rng.gen_range(-bound..=bound)).collect())
}
