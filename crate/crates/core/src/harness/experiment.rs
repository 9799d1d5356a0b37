use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::coverage::CoverageGrid;
use super::run::{run_dap, run_postdap, train_oracle, TraceRow, ValidationContext};
use super::stats::Terminal;
use crate::agent::{RewardDatabase, Variant};
use crate::config::ExperimentConfig;
use crate::diffnet::ParamSet;
use crate::error::{Error, Result};

/// Everything one (variant, seed) run produces.
#[derive(Debug)]
pub struct RunOutput {
    pub variant: Variant,
    pub seed: u64,
    pub record: Vec<TraceRow>,
    pub terminal: Terminal,
    /// Intrinsic rewards recorded by a C/B run.
    pub rewards: Option<RewardDatabase>,
    /// Final parameters of every network, by short name.
    pub params: Vec<(String, ParamSet)>,
    /// Visit statistics at the end of the DAP; absent for the oracle.
    pub coverage: Option<CoverageGrid>,
}

impl ValidationContext {
    pub fn for_config(cfg: &ExperimentConfig) -> Result<Self> {
        Self::build(&cfg.env, &cfg.oracle.grid, cfg.oracle.split_seed, &cfg.plan)
    }
}

/// Runs one variant at one seed: oracle training, or DAP then post-DAP.
pub fn run_one(
    cfg: &ExperimentConfig,
    ctx: &ValidationContext,
    variant: Variant,
    seed: u64,
    db: Option<Arc<RewardDatabase>>,
) -> Result<RunOutput> {
    let agent_cfg = cfg.agent_config();
    if variant == Variant::Oracle {
        let out = train_oracle(&agent_cfg.model, agent_cfg.optimizer, agent_cfg.rates.fm, agent_cfg.grad_clip, &cfg.plan, seed, ctx)?;
        let dap = out.at_dap.unwrap_or(out.terminal);
        return Ok(RunOutput {
            variant,
            seed,
            record: out.record,
            terminal: Terminal {
                dap_mse: dap.mse,
                dap_percent: dap.percent,
                post_mse: out.terminal.mse,
                post_percent: out.terminal.percent,
            },
            rewards: None,
            params: vec![("fm".into(), out.fm.params)],
            coverage: None,
        });
    }
    let dap = run_dap(variant, &agent_cfg, &cfg.env, &cfg.plan, seed, ctx, db)?;
    let mut params: Vec<(String, ParamSet)> =
        dap.agent.param_sets().into_iter().filter(|(n, _)| *n != "fm").map(|(n, p)| (n.to_string(), p.clone())).collect();
    let rewards = (variant == Variant::Cb).then(|| dap.agent.recorded_rewards().clone());
    let (fm, opt, pool) = dap.agent.into_model_and_pool();
    let post = run_postdap(fm, opt, pool, &agent_cfg, &cfg.plan, cfg.plan.dap_steps + 1, ctx)?;
    params.insert(0, ("fm".into(), post.fm.params));
    let mut record = dap.record;
    record.extend(post.record);
    Ok(RunOutput {
        variant,
        seed,
        record,
        terminal: Terminal {
            dap_mse: dap.terminal.mse,
            dap_percent: dap.terminal.percent,
            post_mse: post.terminal.mse,
            post_percent: post.terminal.percent,
        },
        rewards,
        params,
        coverage: Some(dap.coverage),
    })
}

/// Runs every (variant, seed) pair on up to `jobs` threads. PG/IRS runs start
/// only after the C/B run of the same seed has finished and replay its
/// reward database.
pub fn run_suite(
    cfg: &ExperimentConfig,
    ctx: &ValidationContext,
    variants: &[Variant],
    seeds: &[u64],
    jobs: usize,
) -> Result<BTreeMap<(Variant, u64), RunOutput>> {
    let needs_cb = variants.contains(&Variant::PgIrs);
    if needs_cb && !variants.contains(&Variant::Cb) {
        return Err(Error::Dependency("PG/IRS runs need C/B runs of the same seeds".into()));
    }
    let first: Vec<(Variant, u64)> =
        variants.iter().filter(|v| **v != Variant::PgIrs).flat_map(|v| seeds.iter().map(move |s| (*v, *s))).collect();
    let mut results = run_pool(cfg, ctx, &first, jobs, |_, _| None)?;
    if needs_cb {
        let dbs: BTreeMap<u64, Arc<RewardDatabase>> = seeds
            .iter()
            .map(|s| (*s, Arc::new(results[&(Variant::Cb, *s)].rewards.clone().unwrap_or_default())))
            .collect();
        let second: Vec<(Variant, u64)> = seeds.iter().map(|s| (Variant::PgIrs, *s)).collect();
        results.extend(run_pool(cfg, ctx, &second, jobs, |_, s| Some(dbs[&s].clone()))?);
    }
    Ok(results)
}

fn run_pool<F>(
    cfg: &ExperimentConfig,
    ctx: &ValidationContext,
    work: &[(Variant, u64)],
    jobs: usize,
    db_for: F,
) -> Result<BTreeMap<(Variant, u64), RunOutput>>
where
    F: Fn(Variant, u64) -> Option<Arc<RewardDatabase>> + Sync,
{
    let next = AtomicUsize::new(0);
    let out = Mutex::new(BTreeMap::new());
    let first_err: Mutex<Option<Error>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(work.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= work.len() || first_err.lock().expect("lock").is_some() {
                    break;
                }
                let (v, s) = work[i];
                log::info!("run {} seed {s} started", v.id());
                match run_one(cfg, ctx, v, s, db_for(v, s)) {
                    Ok(r) => {
                        out.lock().expect("lock").insert((v, s), r);
                    }
                    Err(e) => {
                        first_err.lock().expect("lock").get_or_insert(e);
                    }
                }
            });
        }
    });
    if let Some(e) = first_err.into_inner().expect("lock") {
        return Err(e);
    }
    Ok(out.into_inner().expect("lock"))
}
