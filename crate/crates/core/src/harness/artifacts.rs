//! On-disk layout of runs and comparisons.
//!
//! A run lives in `root/<variant>/<seed>/<config hash>/` and holds
//! `manifest.json`, `traces.csv`, `summary.json`, `checkpoint.bin` and, for
//! C/B, `rewards.bin`. The manifest is written first with status `running`
//! and rewritten as `complete` once every other file is in place.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::experiment::RunOutput;
use super::run::{PhasePlan, Stage, TraceRow};
use super::stats::{Comparison, Terminal};
use crate::agent::{RewardDatabase, Variant};
use crate::config::ExperimentConfig;
use crate::diffnet::checkpoint::write_checkpoint;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
pub const TRACES: &str = "traces.csv";
pub const SUMMARY: &str = "summary.json";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const REWARDS: &str = "rewards.bin";

/// How steps are numbered in traces and summaries.
pub const CLOCK: &str = "DAP steps 1..=T, post-DAP epochs continue at T+1; oracle epochs start at 1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub variant: String,
    pub plan: PhasePlan,
    pub code_version: String,
    /// Seconds since the Unix epoch.
    pub started: u64,
    pub finished: Option<u64>,
    pub status: RunStatus,
    pub files: Vec<String>,
}

/// Published full-scale means, kept next to each result for orientation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub dap_mse: f64,
    pub dap_percent: f64,
    pub post_mse: f64,
    pub post_percent: f64,
}

impl Reference {
    pub fn of(v: Variant) -> Self {
        let (dap_mse, dap_percent, post_mse, post_percent) = match v {
            Variant::Oracle => (0.0008, 0.8430, 0.0008, 0.8428),
            Variant::Cb => (0.0033, 1.7181, 0.0017, 1.2420),
            Variant::Cpe => (0.0035, 1.7611, 0.0019, 1.2882),
            Variant::PgIrs => (0.0035, 1.7637, 0.0020, 1.2976),
            Variant::PgGr => (0.0048, 2.0559, 0.0030, 1.6288),
            Variant::Prw => (0.6663, 22.2734, 0.6615, 22.1453),
        };
        Self { dap_mse, dap_percent, post_mse, post_percent }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub variant: Variant,
    pub seed: u64,
    pub terminal: Terminal,
    pub clock: String,
    pub final_cr: Option<f64>,
    pub final_ce: Option<f64>,
    pub reference_full_scale: Reference,
}

/// Directory of one run.
pub fn run_dir(root: &Path, variant: Variant, seed: u64, hash: &str) -> PathBuf {
    root.join(variant.id()).join(seed.to_string()).join(hash)
}

/// Directory of a comparison over a whole configuration.
pub fn compare_dir(root: &Path, hash: &str) -> PathBuf {
    root.join("compare").join(hash)
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

impl RunManifest {
    pub fn start(cfg: &ExperimentConfig, variant: Variant, seed: u64) -> Self {
        Self {
            config_hash: cfg.hash(),
            seed,
            variant: variant.id().to_string(),
            plan: cfg.plan.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started: now(),
            finished: None,
            status: RunStatus::Running,
            files: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        write_json(&dir.join(MANIFEST), self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Trace CSV; absent values are left empty.
pub fn write_traces(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["step", "stage", "loss", "reward", "CR", "CE", "error_pct", "lr"]).map_err(csv_err)?;
    for r in rows {
        let stage = match r.stage {
            Stage::Dap => "dap",
            Stage::PostDap => "postdap",
        };
        w.write_record([
            r.step.to_string(),
            stage.to_string(),
            r.loss.to_string(),
            opt(r.reward),
            opt(r.cr),
            opt(r.ce),
            opt(r.error_pct),
            r.lr.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Writes every artifact of a finished run and marks its manifest complete.
pub fn write_run(root: &Path, cfg: &ExperimentConfig, out: &RunOutput, mut manifest: RunManifest) -> Result<PathBuf> {
    let dir = run_dir(root, out.variant, out.seed, &manifest.config_hash);
    fs::create_dir_all(&dir)?;
    let mut files = vec![TRACES.to_string(), SUMMARY.to_string(), CHECKPOINT.to_string()];
    write_traces(&dir.join(TRACES), &out.record)?;
    let summary = RunSummary {
        variant: out.variant,
        seed: out.seed,
        terminal: out.terminal,
        clock: CLOCK.to_string(),
        final_cr: out.coverage.as_ref().map(|c| c.coverage_rate()),
        final_ce: out.coverage.as_ref().map(|c| c.coverage_entropy()),
        reference_full_scale: Reference::of(out.variant),
    };
    write_json(&dir.join(SUMMARY), &summary)?;
    let sets: Vec<(&str, &_)> = out.params.iter().map(|(n, p)| (n.as_str(), p)).collect();
    let mut bytes = Vec::new();
    write_checkpoint(&mut bytes, &sets)?;
    write_atomic(&dir.join(CHECKPOINT), &bytes)?;
    if let Some(db) = &out.rewards {
        let mut bytes = Vec::new();
        db.write_to(&mut bytes)?;
        write_atomic(&dir.join(REWARDS), &bytes)?;
        files.push(REWARDS.to_string());
    }
    debug_assert_eq!(manifest.config_hash, cfg.hash());
    manifest.files = files;
    manifest.status = RunStatus::Complete;
    manifest.finished = Some(now());
    manifest.write(&dir)?;
    Ok(dir)
}

/// Summary of a run that already completed under this configuration, if any.
pub fn completed_summary(root: &Path, hash: &str, variant: Variant, seed: u64) -> Result<Option<RunSummary>> {
    let dir = run_dir(root, variant, seed, hash);
    if !dir.join(MANIFEST).exists() {
        return Ok(None);
    }
    let m = RunManifest::read(&dir)?;
    if m.status != RunStatus::Complete || !dir.join(SUMMARY).exists() {
        return Ok(None);
    }
    read_json(&dir.join(SUMMARY)).map(Some)
}

/// Reward database of a completed C/B run.
pub fn load_rewards(root: &Path, hash: &str, seed: u64) -> Result<RewardDatabase> {
    let path = run_dir(root, Variant::Cb, seed, hash).join(REWARDS);
    if !path.exists() {
        return Err(Error::Dependency(format!(
            "PG/IRS seed {seed} needs the C/B reward database at {}",
            path.display()
        )));
    }
    RewardDatabase::read_from(std::io::BufReader::new(File::open(&path)?))
}

/// Writes `summary.csv`, `tests.csv` and `comparison.json` into `dir`.
pub fn write_comparison(dir: &Path, cmp: &Comparison) -> Result<()> {
    fs::create_dir_all(dir)?;
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "variant", "runs", "dap_mse_mean", "dap_mse_sd", "dap_pct_mean", "dap_pct_sd", "post_mse_mean", "post_mse_sd",
        "post_pct_mean", "post_pct_sd",
    ])
    .map_err(csv_err)?;
    for r in &cmp.summary {
        let mut rec = vec![r.variant.label().to_string(), r.runs.to_string()];
        for m in [r.dap_mse, r.dap_percent, r.post_mse, r.post_percent] {
            rec.push(m.mean.to_string());
            rec.push(m.sd.to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    write_atomic(&dir.join("summary.csv"), &w.into_inner().map_err(|e| Error::Format(e.to_string()))?)?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["hypothesis", "phase", "U", "p", "method", "alpha", "reject", "degenerate"]).map_err(csv_err)?;
    for t in &cmp.tests {
        w.write_record([
            format!("{} < {}", t.less.label(), t.greater.label()),
            serde_json::to_value(t.phase).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            t.test.u.to_string(),
            t.test.p.to_string(),
            format!("{:?}", t.test.method).to_lowercase(),
            t.alpha.to_string(),
            t.reject.to_string(),
            t.test.degenerate.to_string(),
        ])
        .map_err(csv_err)?;
    }
    write_atomic(&dir.join("tests.csv"), &w.into_inner().map_err(|e| Error::Format(e.to_string()))?)?;
    let f = BufWriter::new(File::create(dir.join("comparison.json"))?);
    serde_json::to_writer_pretty(f, cmp).map_err(|e| Error::Format(e.to_string()))?;
    Ok(())
}
