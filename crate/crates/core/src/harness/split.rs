use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Train, test and validation index sets drawn without replacement in the
/// ratio `0.8 : 0.16 : 0.04`.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub validation: Vec<usize>,
}

impl OracleSplit {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if n < 3 {
            return Err(Error::contract(format!("cannot split {n} rows three ways")));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (n as f64 * 0.8).round() as usize;
        let n_test = (n as f64 * 0.16).round() as usize;
        let validation = idx.split_off(n_train + n_test);
        let test = idx.split_off(n_train);
        Ok(Self { train: idx, test, validation })
    }
}
