use ndarray::Array2;
use rand::Rng;

use super::{states_matrix, ForwardModel, ModelConfig, Sample};
use crate::diffnet::{Mlp, Optimizer, ParamSet};
use crate::error::{Error, Result};
use crate::mathcore::{
    gaussian_kl, gaussian_kl_with_grad, householder_cov, householder_cov_backward, Gaussian,
    HouseholderCovParams, Precision, Vec2, Vec4,
};

/// Added to `softplus(d_raw)` so every eigenvalue stays strictly positive.
pub const COV_FLOOR: f64 = 1e-6;
const OUTPUTS: usize = 12;
/// Importance weights are clipped to `[1 / W, W]`.
const WEIGHT_CLIP: f64 = 10.0;

/// Decoded network output at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaOutput {
    pub mean: Vec4,
    pub d_raw: Vec4,
    pub hh: HouseholderCovParams<4>,
}

impl MetaOutput {
    pub fn dist(&self) -> Result<Gaussian<4>> {
        Ok(Gaussian { mean: self.mean, cov: householder_cov(&self.hh)? })
    }
}

/// Gaussian meta-model `Q_ψ(s' | s)`: mean, then eigenvalues through a
/// softplus, then a Householder direction.
#[derive(Clone, Debug, PartialEq)]
pub struct MetaModel {
    pub params: ParamSet,
    net: Mlp,
    identity_skip: bool,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl MetaModel {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let mut params = ParamSet::new();
        let net = Mlp::new(&mut params, "meta", &cfg.layer_sizes(4, OUTPUTS), rng)?;
        Ok(Self { params, net, identity_skip: cfg.identity_skip })
    }

    fn decode(&self, s: &Vec4, row: &[f64]) -> Result<MetaOutput> {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("meta-model produced a non-finite output"));
        }
        let mut mean = Vec4::from_column_slice(&row[..4]);
        if self.identity_skip {
            mean += s;
        }
        let d_raw = Vec4::from_column_slice(&row[4..8]);
        let hh = HouseholderCovParams {
            d: d_raw.map(|x| softplus(x) + COV_FLOOR),
            v: Vec4::from_column_slice(&row[8..12]),
        };
        hh.validate()?;
        Ok(MetaOutput { mean, d_raw, hh })
    }

    pub fn outputs_batch(&self, states: &[Vec4]) -> Result<Vec<MetaOutput>> {
        let out = self.net.forward(&self.params, states_matrix(states, states.len()).view());
        out.rows()
            .into_iter()
            .zip(states)
            .map(|(r, s)| self.decode(s, r.as_slice().expect("row-major")))
            .collect()
    }

    pub fn mm_dist(&self, s: &Vec4) -> Result<Gaussian<4>> {
        self.outputs_batch(std::slice::from_ref(s))?[0].dist()
    }

    /// Distributions and their factorizations, one per state.
    pub fn prepared_batch(&self, states: &[Vec4]) -> Result<Vec<(Gaussian<4>, Precision<4>)>> {
        self.outputs_batch(states)?
            .iter()
            .map(|o| {
                let g = o.dist()?;
                let p = Precision::of(&g, "meta-model covariance")?;
                Ok((g, p))
            })
            .collect()
    }

    /// Weighted mean of `KL[P_θ(·|a,s) || Q_ψ(·|s)]`.
    pub fn devaluation_loss(&self, fm: &ForwardModel, states: &[Vec4], actions: &[Vec2], weights: &[f64]) -> Result<f64> {
        check_batch(states, actions, weights)?;
        let lls = fm.local_linear_batch(states)?;
        let outs = self.outputs_batch(states)?;
        let mut total = 0.0;
        for i in 0..states.len() {
            let p = lls[i].dist(&states[i], &actions[i], fm.input_var());
            total += weights[i] * gaussian_kl(&p, &outs[i].dist()?)?;
        }
        Ok(total / states.len() as f64)
    }

    /// Devaluation loss with its gradient accumulated into `self.params`.
    /// The forward model is borrowed immutably: no gradient reaches it.
    pub fn devaluation_loss_and_grad(
        &mut self,
        fm: &ForwardModel,
        states: &[Vec4],
        actions: &[Vec2],
        weights: &[f64],
    ) -> Result<f64> {
        check_batch(states, actions, weights)?;
        let n = states.len() as f64;
        let lls = fm.local_linear_batch(states)?;
        let cache = self.net.forward_cached(&self.params, states_matrix(states, states.len()).view());
        let out = cache.output();
        let mut d_out = Array2::zeros((states.len(), OUTPUTS));
        let mut total = 0.0;
        for i in 0..states.len() {
            let mo = self.decode(&states[i], out.row(i).as_slice().expect("row-major"))?;
            let p = lls[i].dist(&states[i], &actions[i], fm.input_var());
            let (kl, g) = gaussian_kl_with_grad(&p, &mo.dist()?)?;
            total += weights[i] * kl;
            let scale = weights[i] / n;
            let (gd, gv) = householder_cov_backward(&mo.hh, &g.cov_q)?;
            let mut row = d_out.row_mut(i);
            for k in 0..4 {
                row[k] = scale * g.mean_q[k];
                row[4 + k] = scale * gd[k] * sigmoid(mo.d_raw[k]);
                row[8 + k] = scale * gv[k];
            }
        }
        self.net.backward(&mut self.params, &cache, d_out.view());
        Ok(total / n)
    }
}

fn check_batch(states: &[Vec4], actions: &[Vec2], weights: &[f64]) -> Result<()> {
    if states.is_empty() || states.len() != actions.len() || states.len() != weights.len() {
        return Err(Error::contract(format!(
            "devaluation batch needs matching non-empty inputs, got {} states, {} actions, {} weights",
            states.len(),
            actions.len(),
            weights.len()
        )));
    }
    Ok(())
}

/// `KL[P_θ(·|a,s) || Q_ψ(·|s)]` at a single state-action pair.
pub fn devaluation_objective(fm: &ForwardModel, mm: &MetaModel, s: &Vec4, a: &Vec2) -> Result<f64> {
    gaussian_kl(&fm.fm_dist(s, a)?, &mm.mm_dist(s)?)
}

/// Importance-weight statistics of one meta-model update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WeightDiagnostics {
    pub loss: f64,
    pub mean_weight: f64,
    pub clipped: usize,
    /// Samples whose density ratio was not finite.
    pub dropped: usize,
}

/// One weighted gradient step on the meta-model. Each sample is weighted by
/// `P_new(s'|a,s) / P_old(s'|a,s)`, clipped to `[0.1, 10]`, so the update
/// tracks the freshly trained forward model.
pub fn mm_update_weighted(
    mm: &mut MetaModel,
    opt: &mut Optimizer,
    fm_old: &ForwardModel,
    fm_new: &ForwardModel,
    batch: &[Sample],
    rate: f64,
    clip_norm: Option<f64>,
) -> Result<WeightDiagnostics> {
    let states: Vec<Vec4> = batch.iter().map(|b| b.s).collect();
    let old = fm_old.local_linear_batch(&states)?;
    let new = fm_new.local_linear_batch(&states)?;
    let mut diag = WeightDiagnostics::default();
    let (mut keep_s, mut keep_a, mut weights) = (Vec::new(), Vec::new(), Vec::new());
    for (i, b) in batch.iter().enumerate() {
        let ln_new = new[i].dist(&b.s, &b.a, fm_new.input_var()).log_density(&b.s_next);
        let ln_old = old[i].dist(&b.s, &b.a, fm_old.input_var()).log_density(&b.s_next);
        let w = match (ln_new, ln_old) {
            (Ok(n), Ok(o)) => (n - o).exp(),
            _ => f64::NAN,
        };
        if w.is_nan() {
            diag.dropped += 1;
            continue;
        }
        let c = w.clamp(1.0 / WEIGHT_CLIP, WEIGHT_CLIP);
        if c != w {
            diag.clipped += 1;
        }
        keep_s.push(b.s);
        keep_a.push(b.a);
        weights.push(c);
    }
    if weights.is_empty() {
        return Err(Error::numerical("every importance weight in the meta-model batch was non-finite"));
    }
    diag.mean_weight = weights.iter().sum::<f64>() / weights.len() as f64;
    mm.params.zero_grad();
    diag.loss = mm.devaluation_loss_and_grad(fm_new, &keep_s, &keep_a, &weights)?;
    if let Some(c) = clip_norm {
        mm.params.clip_grad_norm(c);
    }
    opt.step(&mut mm.params, rate)?;
    Ok(diag)
}
