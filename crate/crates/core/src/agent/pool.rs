use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::{OracleRow, State};
use crate::error::{Error, Result};

/// One replay record: the state, the chosen action, its probability under
/// the behaviour policy at insertion time, and the successor state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub s: State,
    pub a_index: usize,
    pub a: [f64; 2],
    pub behavior_prob: f64,
    pub s_next: State,
    pub t: u64,
}

impl Transition {
    pub fn to_row(&self) -> OracleRow {
        OracleRow { s: self.s, a: self.a, s_next: self.s_next }
    }
}

/// Unbounded experience pool with uniform sampling driven by its own stream.
#[derive(Clone, Debug)]
pub struct ExperiencePool {
    items: Vec<Transition>,
    rng: ChaCha8Rng,
}

impl ExperiencePool {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { items: Vec::new(), rng }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Transition] {
        &self.items
    }

    pub fn insert(&mut self, tr: Transition) -> Result<()> {
        if !(tr.behavior_prob > 0.0 && tr.behavior_prob <= 1.0) {
            return Err(Error::contract(format!("behaviour probability {} outside (0, 1]", tr.behavior_prob)));
        }
        if let Some(last) = self.items.last() {
            if tr.t <= last.t {
                return Err(Error::contract(format!("step stamp {} does not follow {}", tr.t, last.t)));
            }
        }
        self.items.push(tr);
        Ok(())
    }

    /// `n` transitions drawn uniformly with replacement.
    pub fn sample(&mut self, n: usize) -> Result<Vec<Transition>> {
        if self.items.is_empty() {
            return Err(Error::contract("cannot sample an empty experience pool"));
        }
        Ok((0..n).map(|_| self.items[self.rng.gen_range(0..self.items.len())]).collect())
    }

    pub(crate) fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Restores length and sampler state captured before a failed step.
    pub(crate) fn rollback(&mut self, len: usize, rng: ChaCha8Rng) {
        self.items.truncate(len);
        self.rng = rng;
    }
}
