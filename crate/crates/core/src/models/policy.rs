use ndarray::{Array2, ArrayView1};
use rand::Rng;

use super::{states_matrix, ModelConfig};
use crate::diffnet::{Mlp, ParamSet};
use crate::error::{Error, Result};
use crate::mathcore::Vec4;

/// Categorical policy `π(a | s; φ)` over the discrete action grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyNet {
    pub params: ParamSet,
    net: Mlp,
    actions: usize,
}

/// Shannon entropy of one probability row, in nats.
pub fn entropy(p: ArrayView1<f64>) -> f64 {
    -p.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        row.mapv_inplace(|z| (z - m).exp());
        let total = row.sum();
        row.mapv_inplace(|e| e / total);
    }
}

impl PolicyNet {
    pub fn new<R: Rng>(cfg: &ModelConfig, actions: usize, rng: &mut R) -> Result<Self> {
        if actions == 0 {
            return Err(Error::contract("policy needs at least one action"));
        }
        let mut params = ParamSet::new();
        let net = Mlp::new(&mut params, "policy", &cfg.layer_sizes(4, actions), rng)?;
        Ok(Self { params, net, actions })
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    /// Row `b` holds `π(· | s_b)`.
    pub fn probs_batch(&self, states: &[Vec4]) -> Result<Array2<f64>> {
        let mut z = self.net.forward(&self.params, states_matrix(states, states.len()).view());
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("policy produced non-finite logits"));
        }
        softmax_rows(&mut z);
        Ok(z)
    }

    /// Exact expected-objective loss `-mean_b w_b Σ_a π(a|s_b) q[b, a]`,
    /// with `q` held constant; the gradient is accumulated into `self.params`.
    pub fn loss_and_grad(&mut self, states: &[Vec4], q: &Array2<f64>, weights: &[f64]) -> Result<f64> {
        let b = states.len();
        if b == 0 || q.dim() != (b, self.actions) || weights.len() != b {
            return Err(Error::contract(format!(
                "policy batch shape mismatch: {b} states, q {:?}, {} weights",
                q.dim(),
                weights.len()
            )));
        }
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite action values in the policy objective"));
        }
        let cache = self.net.forward_cached(&self.params, states_matrix(states, b).view());
        let mut pi = cache.output().clone();
        if pi.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("policy produced non-finite logits"));
        }
        softmax_rows(&mut pi);
        let mut d = Array2::zeros((b, self.actions));
        let mut loss = 0.0;
        for i in 0..b {
            let (p, qi) = (pi.row(i), q.row(i));
            let j = p.dot(&qi);
            loss -= weights[i] * j;
            let scale = -weights[i] / b as f64;
            for k in 0..self.actions {
                d[[i, k]] = scale * p[k] * (qi[k] - j);
            }
        }
        self.net.backward(&mut self.params, &cache, d.view());
        Ok(loss / b as f64)
    }
}
