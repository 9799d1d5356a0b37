//! The `hhvg` command line.

use std::collections::BTreeMap;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::agent::Variant;
use crate::config::{ExperimentConfig, Profile};
use crate::env::{write_dataset, OracleGrid};
use crate::error::{Error, Result};
use crate::harness::artifacts::{self, RunManifest, RunStatus, RunSummary, MANIFEST, SUMMARY};
use crate::harness::{compare_variants, run_one, Terminal, ValidationContext};
use crate::selftest::{self, Budget};

pub const EXIT_OTHER: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_DEPENDENCY: u8 = 4;
pub const EXIT_NUMERICAL: u8 = 5;

/// Process exit code for a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Dependency(_) => EXIT_DEPENDENCY,
        e if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(name = "hhvg", version, about = "Curiosity-driven forward-model learning experiments")]
pub struct Cli {
    /// Root directory of run artifacts.
    #[arg(long, global = true, env = "HHVG_RUN_ROOT", default_value = "runs")]
    pub run_root: PathBuf,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    #[arg(long, value_enum, default_value_t = Profile::Desk)]
    pub profile: Profile,
    /// TOML file layered over the profile.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dotted override such as `agent.gamma=0.8`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::load(self.profile, self.config.as_deref(), &self.set)
    }

    fn forward(&self, cmd: &mut Command) {
        cmd.arg("--profile").arg(match self.profile {
            Profile::Desk => "desk",
            Profile::Full => "full",
        });
        if let Some(c) = &self.config {
            cmd.arg("--config").arg(c);
        }
        for s in &self.set {
            cmd.arg("--set").arg(s);
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run variants over seeds, skipping runs already completed.
    Run {
        /// Variant id (oracle, cb, cpe, pgirs, pggr, prw); repeatable. Defaults to all six.
        #[arg(long = "variant", value_parser = parse_variant)]
        variants: Vec<Variant>,
        /// Seed; repeatable. Defaults to 1..=runs of the configuration.
        #[arg(long = "seed")]
        seeds: Vec<u64>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of runs executed concurrently, each in its own process.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Aggregate completed runs into summary and test tables.
    Compare {
        /// Run directories, or any directories containing them.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// Per-test significance level.
        #[arg(long, default_value_t = 0.025)]
        alpha: f64,
        /// Output directory; defaults to `<run-root>/compare`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check numerical invariants and print a pass/fail table.
    Selftest {
        /// Use full-strength sample sizes (slower).
        #[arg(long)]
        full: bool,
    },
    /// Write the oracle transition dataset of a configuration.
    OracleGen {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Entry point shared by the binary and the tests.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// Runs a parsed command; `Ok` carries the exit code.
pub fn execute(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Cmd::Run { variants, seeds, config, jobs } => cmd_run(&cli.run_root, variants, seeds, config, *jobs),
        Cmd::Compare { dirs, alpha, out } => {
            let out = out.clone().unwrap_or_else(|| cli.run_root.join("compare"));
            cmd_compare(dirs, *alpha, &out)
        }
        Cmd::Selftest { full } => {
            let results = selftest::run_all(&if *full { Budget::full() } else { Budget::quick() });
            print!("{}", selftest::report(&results));
            Ok(if results.iter().all(|r| r.passed()) { 0 } else { EXIT_OTHER })
        }
        Cmd::OracleGen { config, out } => {
            let cfg = config.load()?;
            let grid = OracleGrid::new(&cfg.env, &cfg.oracle.grid)?;
            let rows: Vec<_> = grid.iter().collect();
            write_dataset(BufWriter::new(std::fs::File::create(out)?), &rows)?;
            println!("{} rows written to {}", rows.len(), out.display());
            Ok(0)
        }
    }
}

/// Runs one (variant, seed) in this process and writes its artifacts.
/// Returns the run directory.
pub fn run_single(root: &Path, cfg: &ExperimentConfig, ctx: &ValidationContext, variant: Variant, seed: u64) -> Result<PathBuf> {
    let hash = cfg.hash();
    let dir = artifacts::run_dir(root, variant, seed, &hash);
    if artifacts::completed_summary(root, &hash, variant, seed)?.is_some() {
        log::info!("{} seed {seed} already complete in {}", variant.id(), dir.display());
        return Ok(dir);
    }
    let db = if variant == Variant::PgIrs { Some(Arc::new(artifacts::load_rewards(root, &hash, seed)?)) } else { None };
    let manifest = RunManifest::start(cfg, variant, seed);
    manifest.write(&dir)?;
    match run_one(cfg, ctx, variant, seed, db) {
        Ok(out) => artifacts::write_run(root, cfg, &out, manifest),
        Err(e) => {
            let failed = RunManifest { status: RunStatus::Failed, ..manifest };
            let _ = failed.write(&dir);
            Err(e)
        }
    }
}

fn cmd_run(root: &Path, variants: &[Variant], seeds: &[u64], config: &ConfigArgs, jobs: usize) -> Result<u8> {
    let cfg = config.load()?;
    let variants: Vec<Variant> = if variants.is_empty() { Variant::ALL.to_vec() } else { variants.to_vec() };
    let seeds: Vec<u64> = if seeds.is_empty() { (1..=cfg.runs).collect() } else { seeds.to_vec() };
    // PG/IRS replays C/B rewards, so it goes in a second wave.
    let waves: Vec<Vec<(Variant, u64)>> = [false, true]
        .iter()
        .map(|irs| {
            variants
                .iter()
                .filter(|v| (**v == Variant::PgIrs) == *irs)
                .flat_map(|v| seeds.iter().map(move |s| (*v, *s)))
                .collect()
        })
        .collect();
    if jobs > 1 && waves.iter().map(Vec::len).sum::<usize>() > 1 {
        return run_children(root, config, &waves, jobs);
    }
    let ctx = ValidationContext::for_config(&cfg)?;
    for (v, s) in waves.into_iter().flatten() {
        let dir = run_single(root, &cfg, &ctx, v, s)?;
        println!("{} seed {s}: {}", v.id(), dir.display());
    }
    Ok(0)
}

fn run_children(root: &Path, config: &ConfigArgs, waves: &[Vec<(Variant, u64)>], jobs: usize) -> Result<u8> {
    let exe = std::env::current_exe()?;
    let mut worst = 0u8;
    for wave in waves {
        let mut pending = wave.iter();
        let mut running: Vec<(std::process::Child, Variant, u64)> = Vec::new();
        loop {
            while running.len() < jobs {
                let Some(&(v, s)) = pending.next() else { break };
                let mut cmd = Command::new(&exe);
                cmd.arg("--run-root").arg(root).arg("run").arg("--variant").arg(v.id()).arg("--seed").arg(s.to_string());
                config.forward(&mut cmd);
                running.push((cmd.spawn()?, v, s));
            }
            if running.is_empty() {
                break;
            }
            let (mut child, v, s) = running.remove(0);
            let status = child.wait()?;
            if !status.success() {
                let code = status.code().unwrap_or(EXIT_OTHER as i32).clamp(1, 255) as u8;
                log::error!("{} seed {s} exited with {code}", v.id());
                worst = worst.max(code);
            }
        }
    }
    Ok(worst)
}

fn find_run_dirs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if dir.join(MANIFEST).is_file() {
        out.push(dir.to_path_buf());
        return Ok(());
    }
    if dir.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        entries.sort();
        for e in entries {
            if e.is_dir() {
                find_run_dirs(&e, out)?;
            }
        }
    }
    Ok(())
}

/// Terminal metrics of every completed run found under `dirs`, by variant
/// and ordered by seed. Incomplete runs are skipped with a warning.
pub fn collect_terminals(dirs: &[PathBuf]) -> Result<BTreeMap<Variant, Vec<Terminal>>> {
    let mut found = Vec::new();
    for d in dirs {
        find_run_dirs(d, &mut found)?;
    }
    found.sort();
    found.dedup();
    let mut by: BTreeMap<Variant, BTreeMap<u64, Terminal>> = BTreeMap::new();
    for dir in found {
        let m = RunManifest::read(&dir)?;
        if m.status != RunStatus::Complete || !dir.join(SUMMARY).is_file() {
            log::warn!("skipping incomplete run {}", dir.display());
            eprintln!("warning: skipping incomplete run {}", dir.display());
            continue;
        }
        let text = std::fs::read_to_string(dir.join(SUMMARY))?;
        let s: RunSummary = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", dir.display())))?;
        by.entry(s.variant).or_default().insert(s.seed, s.terminal);
    }
    Ok(by.into_iter().map(|(v, m)| (v, m.into_values().collect())).collect())
}

fn cmd_compare(dirs: &[PathBuf], alpha: f64, out: &Path) -> Result<u8> {
    let records = collect_terminals(dirs)?;
    if records.is_empty() {
        eprintln!("error: no completed runs under the given directories");
        return Ok(EXIT_USAGE);
    }
    let cmp = compare_variants(&records, alpha)?;
    artifacts::write_comparison(out, &cmp)?;
    println!("{:<8} {:>4} {:>12} {:>10} {:>12} {:>10}", "variant", "runs", "DAP MSE", "DAP %", "post MSE", "post %");
    for r in &cmp.summary {
        println!(
            "{:<8} {:>4} {:>12.6} {:>10.4} {:>12.6} {:>10.4}",
            r.variant.label(),
            r.runs,
            r.dap_mse.mean,
            r.dap_percent.mean,
            r.post_mse.mean,
            r.post_percent.mean
        );
    }
    for t in &cmp.tests {
        println!(
            "{} < {} {:?}: U = {}, p = {:.3e}, reject at {} = {}",
            t.less.label(),
            t.greater.label(),
            t.phase,
            t.test.u,
            t.test.p,
            t.alpha,
            t.reject
        );
    }
    println!("tables written to {}", out.display());
    Ok(0)
}
