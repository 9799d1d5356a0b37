use std::sync::Arc;

use ndarray::Array2;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::pool::{ExperiencePool, Transition};
use super::rewards::RewardDatabase;
use super::variant::{Role, Variant, VariantSpec};
use crate::diffnet::{Optimizer, OptimizerKind, ParamSet};
use crate::env::{self, ActionGrid, EnvConfig, State};
use crate::error::{Error, Result};
use crate::mathcore::{gaussian_kl, kl_prepared, Precision, Vec2, Vec4};
use crate::models::{mm_update_weighted, ForwardModel, MetaModel, ModelConfig, PolicyNet, Sample, ValueNet};

/// Per-network learning rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearningRates {
    pub fm: f64,
    pub mm: f64,
    pub vf: f64,
    pub ap: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { fm: 1e-3, mm: 1e-3, vf: 1e-3, ap: 1e-4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub model: ModelConfig,
    pub rates: LearningRates,
    pub optimizer: OptimizerKind,
    /// Discount factor.
    pub gamma: f64,
    /// Value updates per outer step.
    pub value_updates: usize,
    /// The target clone is refreshed every this many value updates.
    pub clone_every: u64,
    /// Set from the phase plan when running experiments.
    #[serde(skip)]
    pub batch_size: usize,
    /// Global gradient-norm clip applied before every update.
    pub grad_clip: Option<f64>,
    /// Standard deviation of the surrogate Gaussian rewards.
    pub surrogate_sd: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            rates: LearningRates::default(),
            optimizer: OptimizerKind::Sgd,
            gamma: 0.9,
            value_updates: 4,
            clone_every: 50,
            batch_size: 128,
            grad_clip: Some(10.0),
            surrogate_sd: 0.01,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let r = &self.rates;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if [r.fm, r.mm, r.vf, r.ap].iter().any(|x| !x.is_finite() || *x < 0.0) {
            return bad("learning rates must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.value_updates == 0 || self.clone_every == 0 || self.batch_size == 0 {
            return bad("value_updates, clone_every and batch_size must be positive");
        }
        if self.model.hidden.iter().any(|h| *h == 0) {
            return bad("hidden layer widths must be positive");
        }
        if !(self.model.input_std > 0.0) || !(self.surrogate_sd >= 0.0) {
            return bad("input_std must be positive and surrogate_sd non-negative");
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return bad("grad_clip must be positive when set");
        }
        Ok(())
    }
}

/// Where the policy's rewards come from.
#[derive(Clone, Debug)]
pub enum RewardProvider {
    /// KL before minus KL after one devaluation step.
    Devaluation,
    /// Forward-model loss before minus after one forward-model step.
    LearningProgress,
    /// Samples replayed from a recorded database at the matching step.
    Replay(Arc<RewardDatabase>),
    /// Independent `N(0, sd²)` draws.
    Gaussian { sd: f64 },
    /// No rewards; the policy is uniform and never trained.
    None,
}

pub fn reward_provider_for(variant: Variant, db: Option<Arc<RewardDatabase>>, surrogate_sd: f64) -> Result<RewardProvider> {
    Ok(match variant {
        Variant::Cb => RewardProvider::Devaluation,
        Variant::Cpe => RewardProvider::LearningProgress,
        Variant::PgIrs => match db {
            Some(db) if !db.is_empty() => RewardProvider::Replay(db),
            _ => return Err(Error::Dependency("PG/IRS needs the reward database of a completed C/B run".into())),
        },
        Variant::PgGr => RewardProvider::Gaussian { sd: surrogate_sd },
        Variant::Prw => RewardProvider::None,
        Variant::Oracle => return Err(Error::Config("the oracle variant does not act".into())),
    })
}

/// `KL[P_θ || Q_before] - KL[P_θ || Q_after]` at one state-action pair.
pub fn devaluation_progress(fm: &ForwardModel, before: &MetaModel, after: &MetaModel, s: &Vec4, a: &Vec2) -> Result<f64> {
    let p = fm.fm_dist(s, a)?;
    Ok(gaussian_kl(&p, &before.mm_dist(s)?)? - gaussian_kl(&p, &after.mm_dist(s)?)?)
}

/// Batched devaluation progress over paired states and actions.
pub fn devaluation_progress_batch(
    fm: &ForwardModel,
    before: &MetaModel,
    after: &MetaModel,
    states: &[Vec4],
    actions: &[Vec2],
) -> Result<Vec<f64>> {
    let lls = fm.local_linear_batch(states)?;
    let qb = before.prepared_batch(states)?;
    let qa = after.prepared_batch(states)?;
    (0..states.len())
        .map(|i| {
            let p = lls[i].dist(&states[i], &actions[i], fm.input_var());
            let ld = Precision::of(&p, "forward-model covariance")?.log_det;
            Ok(kl_prepared(&p, ld, &qb[i].0, &qb[i].1) - kl_prepared(&p, ld, &qa[i].0, &qa[i].1))
        })
        .collect()
}

/// Bootstrapped regression target `r + γ V̂(s'; ν̃)` from a frozen clone.
pub fn value_target(r: f64, clone: &ValueNet, s_next: &Vec4, gamma: f64) -> Result<f64> {
    Ok(r + gamma * clone.value(s_next)?)
}

/// Gradient-step counters `(ℓ, i, j, k)` of the forward model, meta-model,
/// value function and policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub fm: u64,
    pub mm: u64,
    pub vf: u64,
    pub ap: u64,
}

/// Per-step losses and rewards.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub t: u64,
    pub state: State,
    pub fm_loss: f64,
    pub vf_loss: Option<f64>,
    pub mm_loss: Option<f64>,
    pub ap_loss: Option<f64>,
    /// Mean reward of the policy batch's sampled actions.
    pub reward: f64,
}

/// Everything an outer step mutates except the pool; cloned as the rollback point.
#[derive(Clone, Debug)]
struct Learner {
    fm: ForwardModel,
    mm: Option<MetaModel>,
    mm_prev: Option<MetaModel>,
    vf: Option<ValueNet>,
    vf_clone: Option<ValueNet>,
    pi: Option<PolicyNet>,
    opt_fm: Optimizer,
    opt_mm: Optimizer,
    opt_vf: Optimizer,
    opt_ap: Optimizer,
    state: State,
    t: u64,
    counters: Counters,
    act_rng: ChaCha8Rng,
    reward_rng: ChaCha8Rng,
    recorded: RewardDatabase,
    fallback_warned: bool,
}

/// A learning agent of one variant together with its world state and pool.
#[derive(Clone, Debug)]
pub struct Agent {
    spec: VariantSpec,
    cfg: AgentConfig,
    env: EnvConfig,
    actions: Vec<Vec2>,
    provider: RewardProvider,
    learner: Learner,
    pool: ExperiencePool,
}

/// Independent ChaCha streams derived from the run seed.
mod stream {
    pub const FM: u64 = 1;
    pub const MM: u64 = 2;
    pub const VF: u64 = 3;
    pub const AP: u64 = 4;
    pub const ACT: u64 = 5;
    pub const POOL: u64 = 6;
    pub const REWARD: u64 = 7;
}

pub(crate) fn seeded_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A freshly initialised forward model; identical across variants for equal seeds.
pub fn initial_forward_model(cfg: &ModelConfig, seed: u64) -> Result<ForwardModel> {
    ForwardModel::new(cfg, &mut seeded_stream(seed, stream::FM))
}

fn to_vec4(s: &State) -> Vec4 {
    s.to_vector()
}

impl Agent {
    pub fn new(variant: Variant, cfg: AgentConfig, env: EnvConfig, seed: u64, db: Option<Arc<RewardDatabase>>) -> Result<Self> {
        cfg.validate()?;
        env.validate()?;
        let spec = variant.spec();
        let provider = reward_provider_for(variant, db, cfg.surrogate_sd)?;
        let grid: ActionGrid = env.action_grid();
        let actions: Vec<Vec2> = (0..grid.len())
            .map(|i| grid.accel(i).map(|a| Vec2::new(a[0], a[1])))
            .collect::<Result<_>>()?;
        let m = &cfg.model;
        let fm = initial_forward_model(m, seed)?;
        let mm = match spec.mm {
            Role::Trained => Some(MetaModel::new(m, &mut seeded_stream(seed, stream::MM))?),
            _ => None,
        };
        let vf = match spec.vf {
            Role::Trained => Some(ValueNet::new(m, &mut seeded_stream(seed, stream::VF))?),
            _ => None,
        };
        let pi = match spec.ap {
            Role::Trained => Some(PolicyNet::new(m, actions.len(), &mut seeded_stream(seed, stream::AP))?),
            _ => None,
        };
        let learner = Learner {
            fm,
            mm_prev: mm.clone(),
            mm,
            vf_clone: vf.clone(),
            vf,
            pi,
            opt_fm: Optimizer::new(cfg.optimizer),
            opt_mm: Optimizer::new(cfg.optimizer),
            opt_vf: Optimizer::new(cfg.optimizer),
            opt_ap: Optimizer::new(cfg.optimizer),
            state: env.start_state(),
            t: 0,
            counters: Counters::default(),
            act_rng: seeded_stream(seed, stream::ACT),
            reward_rng: seeded_stream(seed, stream::REWARD),
            recorded: RewardDatabase::new(),
            fallback_warned: false,
        };
        Ok(Self {
            spec,
            cfg,
            env,
            actions,
            provider,
            learner,
            pool: ExperiencePool::new(seeded_stream(seed, stream::POOL)),
        })
    }

    pub fn spec(&self) -> VariantSpec {
        self.spec
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn state(&self) -> State {
        self.learner.state
    }

    /// Number of completed outer steps.
    pub fn steps(&self) -> u64 {
        self.learner.t
    }

    pub fn counters(&self) -> Counters {
        self.learner.counters
    }

    pub fn pool(&self) -> &ExperiencePool {
        &self.pool
    }

    pub fn forward_model(&self) -> &ForwardModel {
        &self.learner.fm
    }

    pub fn meta_model(&self) -> Option<&MetaModel> {
        self.learner.mm.as_ref()
    }

    pub fn value_net(&self) -> Option<&ValueNet> {
        self.learner.vf.as_ref()
    }

    pub fn value_clone(&self) -> Option<&ValueNet> {
        self.learner.vf_clone.as_ref()
    }

    pub fn policy(&self) -> Option<&PolicyNet> {
        self.learner.pi.as_ref()
    }

    /// Rewards recorded for the sampled actions of each policy update (C/B only).
    pub fn recorded_rewards(&self) -> &RewardDatabase {
        &self.learner.recorded
    }

    /// Every trainable parameter set with its name.
    pub fn param_sets(&self) -> Vec<(&'static str, &ParamSet)> {
        let l = &self.learner;
        let mut v = vec![("fm", &l.fm.params)];
        if let Some(m) = &l.mm {
            v.push(("mm", &m.params));
        }
        if let Some(m) = &l.vf {
            v.push(("vf", &m.params));
        }
        if let Some(m) = &l.pi {
            v.push(("ap", &m.params));
        }
        v
    }

    /// Splits the agent into its forward model, that model's optimizer and
    /// the experience pool for the action-free stage.
    pub fn into_model_and_pool(self) -> (ForwardModel, Optimizer, ExperiencePool) {
        (self.learner.fm, self.learner.opt_fm, self.pool)
    }

    /// Action distribution at `s` under the current behaviour policy.
    pub fn action_probs(&self, s: &State) -> Result<Vec<f64>> {
        match &self.learner.pi {
            Some(pi) => Ok(pi.probs_batch(&[to_vec4(s)])?.row(0).to_vec()),
            None => Ok(vec![1.0 / self.actions.len() as f64; self.actions.len()]),
        }
    }

    /// One outer step. On error every model, optimizer, generator, the
    /// world state and the pool are restored to their state before the call.
    pub fn hhvg_step(&mut self) -> Result<StepReport> {
        let backup = self.learner.clone();
        let (len, rng) = (self.pool.len(), self.pool.rng().clone());
        match self.try_step() {
            Ok(r) => Ok(r),
            Err(e) => {
                self.learner = backup;
                self.pool.rollback(len, rng);
                Err(e)
            }
        }
    }

    fn try_step(&mut self) -> Result<StepReport> {
        let t = self.learner.t;
        self.act(t)?;

        let fm_old = self.learner.fm.clone();
        let fm_loss = self.train_forward_model()?;

        let vf_loss = if self.learner.vf.is_some() { Some(self.fitted_policy_evaluation(&fm_old)?) } else { None };

        let batch = self.pool.sample(self.cfg.batch_size)?;
        let mm_loss = if self.learner.mm.is_some() { Some(self.devaluate(&fm_old, &batch)?) } else { None };

        let (ap_loss, reward) = if self.learner.pi.is_some() {
            let (l, r) = self.policy_update(&fm_old, &batch, t)?;
            (Some(l), r)
        } else {
            (None, 0.0)
        };

        self.learner.t += 1;
        Ok(StepReport { t, state: self.learner.state, fm_loss, vf_loss, mm_loss, ap_loss, reward })
    }

    fn act(&mut self, t: u64) -> Result<()> {
        let s = self.learner.state;
        let probs = self.action_probs(&s)?;
        let idx = match self.learner.pi {
            Some(_) => WeightedIndex::new(&probs)
                .map_err(|e| Error::numerical(format!("policy probabilities unusable: {e}")))?
                .sample(&mut self.learner.act_rng),
            None => self.learner.act_rng.gen_range(0..probs.len()),
        };
        let s_next = env::step(s, idx, &self.env)?;
        let a = self.actions[idx];
        self.pool.insert(Transition { s, a_index: idx, a: [a[0], a[1]], behavior_prob: probs[idx], s_next, t })?;
        self.learner.state = s_next;
        Ok(())
    }

    fn train_forward_model(&mut self) -> Result<f64> {
        let batch: Vec<Sample> = self.pool.sample(self.cfg.batch_size)?.iter().map(sample_of).collect();
        let l = &mut self.learner;
        l.fm.params.zero_grad();
        let loss = l.fm.loss_and_grad(&batch)?;
        if let Some(c) = self.cfg.grad_clip {
            l.fm.params.clip_grad_norm(c);
        }
        l.opt_fm.step(&mut l.fm.params, self.cfg.rates.fm)?;
        l.counters.fm += 1;
        Ok(loss)
    }

    /// Importance weights `π(a|s; φ) / π_behaviour(a|s)` of sampled transitions.
    fn importance_weights(&self, batch: &[Transition]) -> Result<Vec<f64>> {
        match &self.learner.pi {
            Some(pi) => {
                let states: Vec<Vec4> = batch.iter().map(|b| to_vec4(&b.s)).collect();
                let probs = pi.probs_batch(&states)?;
                Ok(batch.iter().enumerate().map(|(i, b)| probs[[i, b.a_index]] / b.behavior_prob).collect())
            }
            None => Ok(vec![1.0; batch.len()]),
        }
    }

    /// Intrinsic rewards of sampled transitions for value regression.
    fn transition_rewards(&self, fm_old: &ForwardModel, batch: &[Transition]) -> Result<Vec<f64>> {
        let l = &self.learner;
        match &self.provider {
            RewardProvider::Devaluation => {
                let (before, after) = (l.mm_prev.as_ref().expect("meta-model"), l.mm.as_ref().expect("meta-model"));
                let states: Vec<Vec4> = batch.iter().map(|b| to_vec4(&b.s)).collect();
                let actions: Vec<Vec2> = batch.iter().map(|b| Vec2::new(b.a[0], b.a[1])).collect();
                devaluation_progress_batch(&l.fm, before, after, &states, &actions)
            }
            RewardProvider::LearningProgress => {
                let samples: Vec<Sample> = batch.iter().map(sample_of).collect();
                let old = fm_old.sample_errors(&samples)?;
                let new = l.fm.sample_errors(&samples)?;
                Ok(old.iter().zip(&new).map(|(o, n)| o - n).collect())
            }
            _ => Err(Error::contract("value learning requires an intrinsic reward")),
        }
    }

    /// `M` weighted regressions of `V̂` towards `R + γ V̂(s'; ν̃)`.
    fn fitted_policy_evaluation(&mut self, fm_old: &ForwardModel) -> Result<f64> {
        let mut last = 0.0;
        for _ in 0..self.cfg.value_updates {
            let batch = self.pool.sample(self.cfg.batch_size)?;
            let rewards = self.transition_rewards(fm_old, &batch)?;
            let weights = self.importance_weights(&batch)?;
            let next: Vec<Vec4> = batch.iter().map(|b| to_vec4(&b.s_next)).collect();
            let states: Vec<Vec4> = batch.iter().map(|b| to_vec4(&b.s)).collect();
            let clone = self.learner.vf_clone.as_ref().expect("value clone");
            let boot = clone.values_batch(&next)?;
            let targets: Vec<f64> = rewards.iter().zip(&boot).map(|(r, v)| r + self.cfg.gamma * v).collect();
            let clip = self.cfg.grad_clip;
            let l = &mut self.learner;
            let vf = l.vf.as_mut().expect("value net");
            vf.params.zero_grad();
            last = vf.loss_and_grad(&states, &targets, &weights)?;
            if let Some(c) = clip {
                vf.params.clip_grad_norm(c);
            }
            l.opt_vf.step(&mut vf.params, self.cfg.rates.vf)?;
            l.counters.vf += 1;
            if l.counters.vf % self.cfg.clone_every == 0 {
                l.vf_clone = l.vf.clone();
            }
        }
        Ok(last)
    }

    fn devaluate(&mut self, fm_old: &ForwardModel, batch: &[Transition]) -> Result<f64> {
        let samples: Vec<Sample> = batch.iter().map(sample_of).collect();
        let l = &mut self.learner;
        let mm = l.mm.as_mut().expect("meta-model");
        let before = mm.clone();
        let diag = mm_update_weighted(mm, &mut l.opt_mm, fm_old, &l.fm, &samples, self.cfg.rates.mm, self.cfg.grad_clip)?;
        if diag.dropped > 0 {
            log::debug!("step {}: {} samples dropped from the meta-model update", l.t, diag.dropped);
        }
        l.mm_prev = Some(before);
        l.counters.mm += 1;
        Ok(diag.loss)
    }

    /// Rewards `R[b, a]` for every action at each batch state, and the
    /// action values the policy ascends.
    fn action_table(&mut self, fm_old: &ForwardModel, states: &[Vec4], t: u64) -> Result<(Array2<f64>, Array2<f64>)> {
        let (nb, na) = (states.len(), self.actions.len());
        let mut r = Array2::zeros((nb, na));
        let mut next: Vec<Vec4> = Vec::new();
        let l = &mut self.learner;
        match &self.provider {
            RewardProvider::Devaluation => {
                let lls = l.fm.local_linear_batch(states)?;
                let qb = l.mm_prev.as_ref().expect("meta-model").prepared_batch(states)?;
                let qa = l.mm.as_ref().expect("meta-model").prepared_batch(states)?;
                next.reserve(nb * na);
                for b in 0..nb {
                    for (k, a) in self.actions.iter().enumerate() {
                        let p = lls[b].dist(&states[b], a, l.fm.input_var());
                        let ld = Precision::of(&p, "forward-model covariance")?.log_det;
                        r[[b, k]] = kl_prepared(&p, ld, &qb[b].0, &qb[b].1) - kl_prepared(&p, ld, &qa[b].0, &qa[b].1);
                        next.push(p.mean);
                    }
                }
            }
            RewardProvider::LearningProgress => {
                let new = l.fm.local_linear_batch(states)?;
                let old = fm_old.local_linear_batch(states)?;
                next.reserve(nb * na);
                for b in 0..nb {
                    for (k, a) in self.actions.iter().enumerate() {
                        let f = new[b].mean(&states[b], a);
                        r[[b, k]] = (f - old[b].mean(&states[b], a)).norm_squared();
                        next.push(f);
                    }
                }
            }
            RewardProvider::Replay(db) => {
                for b in 0..nb {
                    let (draws, stamp) = db.draw(t, na, &mut l.reward_rng)?;
                    if stamp != t && !l.fallback_warned {
                        log::warn!("no replayed rewards at step {t}; using nearest step {stamp}");
                        l.fallback_warned = true;
                    }
                    r.row_mut(b).iter_mut().zip(draws).for_each(|(x, v)| *x = v);
                }
            }
            RewardProvider::Gaussian { sd } => {
                let dist = Normal::new(0.0, *sd).map_err(|e| Error::Config(e.to_string()))?;
                r.iter_mut().for_each(|x| *x = dist.sample(&mut l.reward_rng));
            }
            RewardProvider::None => return Err(Error::contract("policy update without a reward provider")),
        }
        let mut q = r.clone();
        if let Some(vf) = &l.vf {
            let v = vf.values_batch(&next)?;
            q.iter_mut().zip(v).for_each(|(x, v)| *x += self.cfg.gamma * v);
        }
        Ok((r, q))
    }

    /// One ascent step on `Σ_a π(a|s)[R(a,s) + γ V̂(f(s,a))]`, weighted per
    /// sampled transition. Returns the loss and the mean reward of the
    /// sampled actions.
    fn policy_update(&mut self, fm_old: &ForwardModel, batch: &[Transition], t: u64) -> Result<(f64, f64)> {
        let states: Vec<Vec4> = batch.iter().map(|b| to_vec4(&b.s)).collect();
        let (r, q) = self.action_table(fm_old, &states, t)?;
        let weights = self.importance_weights(batch)?;
        let sampled: Vec<f64> = batch.iter().enumerate().map(|(i, b)| r[[i, b.a_index]]).collect();
        let clip = self.cfg.grad_clip;
        let l = &mut self.learner;
        let pi = l.pi.as_mut().expect("policy");
        pi.params.zero_grad();
        let loss = pi.loss_and_grad(&states, &q, &weights)?;
        if let Some(c) = clip {
            pi.params.clip_grad_norm(c);
        }
        l.opt_ap.step(&mut pi.params, self.cfg.rates.ap)?;
        l.counters.ap += 1;
        if matches!(self.provider, RewardProvider::Devaluation) {
            sampled.iter().for_each(|v| l.recorded.record(t, *v));
        }
        Ok((loss, sampled.iter().sum::<f64>() / sampled.len() as f64))
    }
}

pub(crate) fn sample_of(b: &Transition) -> Sample {
    Sample { s: to_vec4(&b.s), a: Vec2::new(b.a[0], b.a[1]), s_next: to_vec4(&b.s_next) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(batch: usize) -> AgentConfig {
        AgentConfig {
            model: ModelConfig { hidden: vec![16, 16], ..ModelConfig::default() },
            batch_size: batch,
            ..AgentConfig::default()
        }
    }

    fn agent(v: Variant, cfg: AgentConfig) -> Agent {
        let db = (v == Variant::PgIrs).then(|| {
            let mut db = RewardDatabase::new();
            db.record(0, 0.5);
            Arc::new(db)
        });
        Agent::new(v, cfg, EnvConfig::default(), 3, db).unwrap()
    }

    #[test]
    fn value_target_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut v = ValueNet::new(&ModelConfig { hidden: vec![4], ..ModelConfig::default() }, &mut rng).unwrap();
        for p in v.params.entries_mut() {
            p.value.iter_mut().for_each(|x| *x = 0.0);
        }
        let s = Vec4::zeros();
        assert_eq!(value_target(0.0, &v, &s, 0.9).unwrap(), 0.0);
        let last = v.params.entries().len() - 1;
        v.params.get_mut(last).value[0] = 2.0;
        assert!((value_target(1.0, &v, &s, 0.9).unwrap() - 2.8).abs() < 1e-15);
    }

    #[test]
    fn first_step_inserts_one_transition_and_advances_counters() {
        for v in Variant::AGENTS {
            let mut a = agent(v, small(8));
            a.hhvg_step().unwrap();
            assert_eq!(a.pool().len(), 1, "{v}");
            let c = a.counters();
            let spec = v.spec();
            let on = |r: Role| u64::from(r == Role::Trained);
            assert_eq!(c, Counters { fm: 1, mm: on(spec.mm), vf: 4 * on(spec.vf), ap: on(spec.ap) }, "{v}");
        }
    }

    #[test]
    fn null_learning_leaves_parameters_untouched() {
        let mut cfg = small(8);
        cfg.rates = LearningRates { fm: 0.0, mm: 0.0, vf: 0.0, ap: 0.0 };
        let mut a = agent(Variant::Cb, cfg);
        let before: Vec<ParamSet> = a.param_sets().into_iter().map(|(_, p)| p.clone()).collect();
        for _ in 0..100 {
            a.hhvg_step().unwrap();
        }
        for ((_, p), b) in a.param_sets().into_iter().zip(&before) {
            assert!(p.same_values(b));
        }
        assert_eq!(a.pool().len(), 100);
    }

    #[test]
    fn clone_tracks_value_net_when_cadence_is_one() {
        let mut cfg = small(8);
        cfg.value_updates = 1;
        cfg.clone_every = 1;
        let mut a = agent(Variant::Cb, cfg);
        for _ in 0..5 {
            a.hhvg_step().unwrap();
            assert!(a.value_net().unwrap().params.same_values(&a.value_clone().unwrap().params));
        }
    }

    #[test]
    fn pgirs_requires_a_database() {
        let err = Agent::new(Variant::PgIrs, small(8), EnvConfig::default(), 0, None).unwrap_err();
        assert!(matches!(err, Error::Dependency(_)));
    }

    #[test]
    fn uniform_policy_frequencies() {
        let mut a = agent(Variant::Prw, small(4));
        let mut counts = vec![0usize; 121];
        let n = 100_000;
        for _ in 0..n {
            let s = a.learner.state;
            a.act(a.learner.t).unwrap();
            a.learner.t += 1;
            counts[a.pool.items().last().unwrap().a_index] += 1;
            a.learner.state = s;
        }
        let p = 1.0 / 121.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let worst = counts.iter().map(|c| ((*c as f64 / n as f64) - p).abs() / se).fold(0.0, f64::max);
        // Max of 121 roughly normal deviates: allow 4.5 se.
        assert!(worst < 4.5, "{worst}");
    }

    #[test]
    fn failed_step_rolls_back_everything() {
        let mut a = agent(Variant::Cb, small(8));
        for _ in 0..3 {
            a.hhvg_step().unwrap();
        }
        let before = a.clone();
        // Poison the forward model so the step fails after acting.
        let fm = &mut a.learner.fm.params;
        *fm.scalar_mut(0) = f64::NAN;
        let poisoned = a.learner.fm.clone();
        assert!(a.hhvg_step().is_err());
        assert!(a.learner.fm.params.same_values(&poisoned.params));
        assert_eq!(a.pool().len(), before.pool().len());
        assert_eq!(a.state(), before.state());
        assert_eq!(a.steps(), before.steps());
        assert_eq!(a.counters(), before.counters());
        for ((_, p), (_, q)) in a.param_sets().into_iter().skip(1).zip(before.param_sets().into_iter().skip(1)) {
            assert!(p.same_values(q));
        }
    }
}
