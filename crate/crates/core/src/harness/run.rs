use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::coverage::CoverageGrid;
use super::metrics::{error_percentage_with, estimate_diameter, ErrorReport};
use super::split::OracleSplit;
use crate::agent::{initial_forward_model, sample_of, seeded_stream, Agent, AgentConfig, ExperiencePool, RewardDatabase, Variant};
use crate::diffnet::{LrSchedule, Optimizer, OptimizerKind};
use crate::env::{EnvConfig, OracleGrid, OracleGridSpec};
use crate::error::{Error, Result};
use crate::mathcore::Vec4;
use crate::models::{ForwardModel, ModelConfig, Sample};

/// Durations and cadences of the two phases and of oracle training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhasePlan {
    pub dap_steps: u64,
    pub postdap_epochs: u64,
    pub batch_size: usize,
    /// Validation error is traced every this many steps or epochs.
    pub eval_every: u64,
    /// Size of the fixed validation subsample used for traces.
    pub eval_rows: usize,
    pub plateau_window: u64,
    pub plateau_factor: f64,
    pub plateau_tol: f64,
    pub oracle_epochs: u64,
    /// Size of the fixed test subsample that drives the oracle's schedule.
    pub oracle_test_rows: usize,
}

impl Default for PhasePlan {
    fn default() -> Self {
        Self {
            dap_steps: 30_000,
            postdap_epochs: 30_000,
            batch_size: 128,
            eval_every: 100,
            eval_rows: 4096,
            plateau_window: 3000,
            plateau_factor: 0.1,
            plateau_tol: 0.0,
            oracle_epochs: 60_000,
            oracle_test_rows: 256,
        }
    }
}

impl PhasePlan {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 || self.eval_rows == 0 || self.oracle_test_rows == 0 {
            return Err(Error::Config("batch_size, eval_every, eval_rows and oracle_test_rows must be positive".into()));
        }
        if self.plateau_window == 0 || !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) || !(self.plateau_tol >= 0.0) {
            return Err(Error::Config("plateau schedule needs a positive window, a factor in (0, 1) and tol >= 0".into()));
        }
        Ok(())
    }

    fn schedule(&self, base: f64) -> Result<LrSchedule> {
        LrSchedule::new(base, self.plateau_window, self.plateau_factor, self.plateau_tol)
    }
}

/// Which stage produced a trace row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Dap,
    PostDap,
}

/// One row of a run's metric stream. Steps are on a single cumulative clock:
/// post-DAP epochs continue after the last DAP step.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub stage: Stage,
    pub loss: f64,
    pub reward: Option<f64>,
    pub cr: Option<f64>,
    pub ce: Option<f64>,
    pub error_pct: Option<f64>,
    pub lr: f64,
}

/// The oracle grid, its split and the fixed evaluation rows derived from them.
#[derive(Clone, Debug)]
pub struct ValidationContext {
    pub grid: OracleGrid,
    pub split: OracleSplit,
    /// Every validation row, for terminal metrics.
    pub rows: Vec<Sample>,
    /// Fixed prefix of `rows` used for traces.
    pub trace_rows: Vec<Sample>,
    /// Fixed prefix of the test split used by the oracle's schedule.
    pub test_rows: Vec<Sample>,
    /// Estimated maximum pairwise distance of the validation targets.
    pub diameter: f64,
}

impl ValidationContext {
    pub fn build(env: &EnvConfig, spec: &OracleGridSpec, split_seed: u64, plan: &PhasePlan) -> Result<Self> {
        let grid = OracleGrid::new(env, spec)?;
        let split = OracleSplit::new(grid.len(), split_seed)?;
        let fetch = |idx: &[usize]| -> Vec<Sample> { idx.iter().map(|i| Sample::from(&grid.row(*i))).collect() };
        let rows = fetch(&split.validation);
        if rows.len() < 2 {
            return Err(Error::Config("validation split needs at least two rows".into()));
        }
        let trace_rows = rows[..plan.eval_rows.min(rows.len())].to_vec();
        let test_rows = fetch(&split.test[..plan.oracle_test_rows.min(split.test.len())]);
        let targets: Vec<Vec4> = rows.iter().map(|r| r.s_next).collect();
        let diameter = estimate_diameter(&targets);
        Ok(Self { grid, split, rows, trace_rows, test_rows, diameter })
    }

    pub fn evaluate(&self, fm: &ForwardModel) -> Result<ErrorReport> {
        error_percentage_with(fm, &self.rows, self.diameter)
    }

    pub fn evaluate_trace(&self, fm: &ForwardModel) -> Result<ErrorReport> {
        error_percentage_with(fm, &self.trace_rows, self.diameter)
    }
}

/// Result of the data accumulation phase.
#[derive(Debug)]
pub struct DapOutcome {
    pub agent: Agent,
    pub record: Vec<TraceRow>,
    pub coverage: CoverageGrid,
    /// Validation error at the end of the phase.
    pub terminal: ErrorReport,
}

/// Runs `plan.dap_steps` outer steps at constant learning rates.
pub fn run_dap(
    variant: Variant,
    agent_cfg: &AgentConfig,
    env: &EnvConfig,
    plan: &PhasePlan,
    seed: u64,
    ctx: &ValidationContext,
    db: Option<Arc<RewardDatabase>>,
) -> Result<DapOutcome> {
    plan.validate()?;
    let cfg = AgentConfig { batch_size: plan.batch_size, ..agent_cfg.clone() };
    let mut agent = Agent::new(variant, cfg, env.clone(), seed, db)?;
    let mut coverage = CoverageGrid::default();
    let start = agent.state();
    coverage.visit(start.x, start.y);
    let mut record = Vec::with_capacity(plan.dap_steps as usize);
    let lr = agent_cfg.rates.fm;
    for step in 1..=plan.dap_steps {
        let rep = agent.hhvg_step()?;
        coverage.visit(rep.state.x, rep.state.y);
        let error_pct = if step % plan.eval_every == 0 {
            Some(ctx.evaluate_trace(agent.forward_model())?.percent)
        } else {
            None
        };
        record.push(TraceRow {
            step,
            stage: Stage::Dap,
            loss: rep.fm_loss,
            reward: agent.policy().map(|_| rep.reward),
            cr: Some(coverage.coverage_rate()),
            ce: Some(coverage.coverage_entropy()),
            error_pct,
            lr,
        });
    }
    let terminal = ctx.evaluate(agent.forward_model())?;
    Ok(DapOutcome { agent, record, coverage, terminal })
}

/// Result of the action-free stage.
#[derive(Debug)]
pub struct PostDapOutcome {
    pub fm: ForwardModel,
    pub record: Vec<TraceRow>,
    pub terminal: ErrorReport,
}

/// Forward-model-only training on a frozen pool with plateau scheduling.
/// Rows are stamped `first_step, first_step + 1, …`.
pub fn run_postdap(
    mut fm: ForwardModel,
    mut opt: Optimizer,
    mut pool: ExperiencePool,
    agent_cfg: &AgentConfig,
    plan: &PhasePlan,
    first_step: u64,
    ctx: &ValidationContext,
) -> Result<PostDapOutcome> {
    plan.validate()?;
    let mut sched = plan.schedule(agent_cfg.rates.fm)?;
    let mut record = Vec::with_capacity(plan.postdap_epochs as usize);
    for epoch in 1..=plan.postdap_epochs {
        let batch: Vec<Sample> = pool.sample(plan.batch_size)?.iter().map(sample_of).collect();
        fm.params.zero_grad();
        let loss = fm.loss_and_grad(&batch)?;
        if let Some(c) = agent_cfg.grad_clip {
            fm.params.clip_grad_norm(c);
        }
        let lr = sched.rate();
        opt.step(&mut fm.params, lr)?;
        sched.update(loss)?;
        let error_pct = if epoch % plan.eval_every == 0 { Some(ctx.evaluate_trace(&fm)?.percent) } else { None };
        record.push(TraceRow {
            step: first_step + epoch - 1,
            stage: Stage::PostDap,
            loss,
            reward: None,
            cr: None,
            ce: None,
            error_pct,
            lr,
        });
    }
    let terminal = ctx.evaluate(&fm)?;
    Ok(PostDapOutcome { fm, record, terminal })
}

/// Result of supervised training on the oracle grid.
#[derive(Debug)]
pub struct OracleOutcome {
    pub fm: ForwardModel,
    pub record: Vec<TraceRow>,
    /// Validation error after `plan.dap_steps` epochs (when reached).
    pub at_dap: Option<ErrorReport>,
    pub terminal: ErrorReport,
}

const ORACLE_STREAM: u64 = 8;

/// Minimises the forward-model loss on the training split, reducing the rate
/// when the loss on a fixed test subsample plateaus. Validation rows are
/// only ever evaluated, never trained on.
pub fn train_oracle(
    model: &ModelConfig,
    optimizer: OptimizerKind,
    base_rate: f64,
    grad_clip: Option<f64>,
    plan: &PhasePlan,
    seed: u64,
    ctx: &ValidationContext,
) -> Result<OracleOutcome> {
    train_on_rows(model, optimizer, base_rate, grad_clip, plan, seed, ctx, |rng| {
        let i = ctx.split.train[rng.gen_range(0..ctx.split.train.len())];
        Sample::from(&ctx.grid.row(i))
    })
}

#[allow(clippy::too_many_arguments)]
fn train_on_rows<F>(
    model: &ModelConfig,
    optimizer: OptimizerKind,
    base_rate: f64,
    grad_clip: Option<f64>,
    plan: &PhasePlan,
    seed: u64,
    ctx: &ValidationContext,
    mut draw: F,
) -> Result<OracleOutcome>
where
    F: FnMut(&mut rand_chacha::ChaCha8Rng) -> Sample,
{
    plan.validate()?;
    let mut fm = initial_forward_model(model, seed)?;
    let mut opt = Optimizer::new(optimizer);
    let mut sched = plan.schedule(base_rate)?;
    let mut rng = seeded_stream(seed, ORACLE_STREAM);
    let mut record = Vec::with_capacity(plan.oracle_epochs as usize);
    let mut at_dap = None;
    for epoch in 1..=plan.oracle_epochs {
        let batch: Vec<Sample> = (0..plan.batch_size).map(|_| draw(&mut rng)).collect();
        fm.params.zero_grad();
        let loss = fm.loss_and_grad(&batch)?;
        if let Some(c) = grad_clip {
            fm.params.clip_grad_norm(c);
        }
        let lr = sched.rate();
        opt.step(&mut fm.params, lr)?;
        sched.update(fm.loss(&ctx.test_rows)?)?;
        let error_pct = if epoch % plan.eval_every == 0 { Some(ctx.evaluate_trace(&fm)?.percent) } else { None };
        if epoch == plan.dap_steps {
            at_dap = Some(ctx.evaluate(&fm)?);
        }
        let stage = if epoch <= plan.dap_steps { Stage::Dap } else { Stage::PostDap };
        record.push(TraceRow { step: epoch, stage, loss, reward: None, cr: None, ce: None, error_pct, lr });
    }
    let terminal = ctx.evaluate(&fm)?;
    Ok(OracleOutcome { fm, record, at_dap, terminal })
}

/// Supervised training on an explicit row set, with the same schedule and
/// evaluation as [`train_oracle`].
pub fn train_on_dataset(
    model: &ModelConfig,
    optimizer: OptimizerKind,
    base_rate: f64,
    plan: &PhasePlan,
    seed: u64,
    ctx: &ValidationContext,
    rows: &[Sample],
) -> Result<OracleOutcome> {
    if rows.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    train_on_rows(model, optimizer, base_rate, None, plan, seed, ctx, |rng| rows[rng.gen_range(0..rows.len())])
}
