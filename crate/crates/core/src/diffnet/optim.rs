use serde::{Deserialize, Serialize};

use super::ParamSet;
use crate::error::{Error, Result};

/// Plain gradient descent: `p -= rate * grad`, then clears gradients.
///
/// Non-finite gradients abort the update before anything is written.
pub fn sgd_step(params: &mut ParamSet, rate: f64) -> Result<()> {
    if let Some(name) = params.first_non_finite_grad() {
        return Err(Error::PoisonedUpdate(name.to_string()));
    }
    for p in params.entries_mut() {
        for (v, g) in p.value.iter_mut().zip(p.grad.iter_mut()) {
            *v -= rate * *g;
            *g = 0.0;
        }
    }
    params.bump_step();
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Sgd,
    Adam,
}

/// Per-model optimizer state. SGD is stateless; Adam keeps first and second moments.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn step(&mut self, params: &mut ParamSet, rate: f64) -> Result<()> {
        match self.kind {
            OptimizerKind::Sgd => sgd_step(params, rate),
            OptimizerKind::Adam => self.adam_step(params, rate),
        }
    }

    fn adam_step(&mut self, params: &mut ParamSet, rate: f64) -> Result<()> {
        if let Some(name) = params.first_non_finite_grad() {
            return Err(Error::PoisonedUpdate(name.to_string()));
        }
        let n = params.num_scalars();
        if self.m.len() != n {
            self.m = vec![0.0; n];
            self.v = vec![0.0; n];
            self.t = 0;
        }
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t as i32);
        let c2 = 1.0 - BETA2.powi(self.t as i32);
        let mut k = 0;
        for p in params.entries_mut() {
            for (value, g) in p.value.iter_mut().zip(p.grad.iter_mut()) {
                self.m[k] = BETA1 * self.m[k] + (1.0 - BETA1) * *g;
                self.v[k] = BETA2 * self.v[k] + (1.0 - BETA2) * *g * *g;
                *value -= rate * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + ADAM_EPS);
                *g = 0.0;
                k += 1;
            }
        }
        params.bump_step();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64, g: f64) -> ParamSet {
        let mut ps = ParamSet::new();
        ps.add("p", &[1], vec![v]).unwrap();
        ps.get_mut(0).grad[0] = g;
        ps
    }

    #[test]
    fn arithmetic_and_bookkeeping() {
        let mut ps = scalar(1.0, 0.5);
        sgd_step(&mut ps, 0.1).unwrap();
        assert!((ps.get(0).value[0] - 0.95).abs() < 1e-15);
        assert_eq!(ps.get(0).grad[0], 0.0);
        assert_eq!(ps.step_count(), 1);
        sgd_step(&mut ps, 0.1).unwrap();
        assert!((ps.get(0).value[0] - 0.95).abs() < 1e-15);
        assert_eq!(ps.step_count(), 2);
    }

    #[test]
    fn poisoned_gradient_leaves_parameters() {
        let mut ps = scalar(1.0, f64::NAN);
        let before = ps.clone();
        assert!(matches!(sgd_step(&mut ps, 0.1), Err(Error::PoisonedUpdate(_))));
        assert_eq!(ps.get(0).value, before.get(0).value);
        assert_eq!(ps.step_count(), 0);
        let mut adam = Optimizer::new(OptimizerKind::Adam);
        assert!(adam.step(&mut ps, 0.1).is_err());
    }

    #[test]
    fn descent_on_convex_quadratic_is_monotone() {
        // f(p) = 0.5 pᵀ diag(1..5) p
        let mut ps = ParamSet::new();
        ps.add("p", &[5], vec![1.0, -2.0, 0.5, 3.0, -1.0]).unwrap();
        let loss = |ps: &ParamSet| {
            ps.get(0).value.iter().enumerate().map(|(i, x)| 0.5 * (i + 1) as f64 * x * x).sum::<f64>()
        };
        let mut prev = loss(&ps);
        for _ in 0..100 {
            let grads: Vec<f64> =
                ps.get(0).value.iter().enumerate().map(|(i, x)| (i + 1) as f64 * x).collect();
            ps.get_mut(0).grad = grads;
            sgd_step(&mut ps, 0.1).unwrap();
            let cur = loss(&ps);
            assert!(cur <= prev);
            prev = cur;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut ps = scalar(1.0, 2.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam);
        opt.step(&mut ps, 0.01).unwrap();
        assert!((ps.get(0).value[0] - 0.99).abs() < 1e-9);
    }
}
