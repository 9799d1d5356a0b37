//! The four parameterized functions of the agent: a bilinear forward model,
//! a Gaussian meta-model with Householder covariance, a value approximator
//! and a categorical policy over the action grid.

mod forward;
mod meta;
mod policy;
mod value;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::mathcore::{Vec2, Vec4};

pub use forward::{ForwardModel, LocalLinear, TRUNK_OUTPUTS};
pub use meta::{devaluation_objective, mm_update_weighted, MetaModel, MetaOutput, WeightDiagnostics, COV_FLOOR};
pub use policy::{entropy, PolicyNet};
pub use value::ValueNet;

/// Architecture shared by the four networks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Hidden layer widths (tanh).
    pub hidden: Vec<usize>,
    /// Standard deviation of the isotropic state uncertainty propagated
    /// through the forward model's Jacobian.
    pub input_std: f64,
    /// Predict `s' - s` instead of `s'`, i.e. the linear part becomes `I + A`.
    pub identity_skip: bool,
    /// `A, B, C, o` are trunk outputs at `s`; when false they are global parameters.
    pub state_dependent: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            input_std: 0.01,
            identity_skip: true,
            state_dependent: true,
        }
    }
}

impl ModelConfig {
    pub(crate) fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(input);
        sizes.extend(&self.hidden);
        sizes.push(output);
        sizes
    }
}

/// One observed transition in model coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub s: Vec4,
    pub a: Vec2,
    pub s_next: Vec4,
}

impl From<&crate::env::OracleRow> for Sample {
    fn from(r: &crate::env::OracleRow) -> Self {
        Self {
            s: r.s.to_vector(),
            a: Vec2::new(r.a[0], r.a[1]),
            s_next: r.s_next.to_vector(),
        }
    }
}

pub(crate) fn states_matrix<'a, I>(states: I, n: usize) -> Array2<f64>
where
    I: IntoIterator<Item = &'a Vec4>,
{
    let mut m = Array2::zeros((n, 4));
    for (mut row, s) in m.rows_mut().into_iter().zip(states) {
        row.iter_mut().zip(s.iter()).for_each(|(r, v)| *r = *v);
    }
    m
}
