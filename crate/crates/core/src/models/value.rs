use ndarray::Array2;
use rand::Rng;

use super::{states_matrix, ModelConfig};
use crate::diffnet::{Mlp, ParamSet};
use crate::error::{Error, Result};
use crate::mathcore::Vec4;

/// State-value approximator `V̂(s; ν)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueNet {
    pub params: ParamSet,
    net: Mlp,
}

impl ValueNet {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let mut params = ParamSet::new();
        let net = Mlp::new(&mut params, "value", &cfg.layer_sizes(4, 1), rng)?;
        Ok(Self { params, net })
    }

    pub fn values_batch(&self, states: &[Vec4]) -> Result<Vec<f64>> {
        let out = self.net.forward(&self.params, states_matrix(states, states.len()).view());
        let v: Vec<f64> = out.column(0).to_vec();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical("value network produced a non-finite output"));
        }
        Ok(v)
    }

    pub fn value(&self, s: &Vec4) -> Result<f64> {
        Ok(self.values_batch(std::slice::from_ref(s))?[0])
    }

    /// Mean of `w/2 (y - V̂(s))²`, with the gradient accumulated into `self.params`.
    pub fn loss_and_grad(&mut self, states: &[Vec4], targets: &[f64], weights: &[f64]) -> Result<f64> {
        if states.is_empty() || states.len() != targets.len() || states.len() != weights.len() {
            return Err(Error::contract("value batch needs matching non-empty states, targets and weights"));
        }
        let n = states.len() as f64;
        let cache = self.net.forward_cached(&self.params, states_matrix(states, states.len()).view());
        let out = cache.output();
        let mut d_out = Array2::zeros((states.len(), 1));
        let mut loss = 0.0;
        for i in 0..states.len() {
            let r = out[[i, 0]] - targets[i];
            if !r.is_finite() {
                return Err(Error::numerical("non-finite value residual"));
            }
            loss += 0.5 * weights[i] * r * r;
            d_out[[i, 0]] = weights[i] * r / n;
        }
        self.net.backward(&mut self.params, &cache, d_out.view());
        Ok(loss / n)
    }
}
