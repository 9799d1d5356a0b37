use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::agent::Variant;
use crate::error::{Error, Result};

/// How the null distribution of `U` was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UMethod {
    /// Exact permutation distribution of the (mid)rank sum.
    Exact,
    /// Normal approximation with tie and continuity corrections.
    Normal,
}

/// One-sided test of "x is stochastically less than y".
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UTest {
    /// `U_x = R_x - n_x (n_x + 1) / 2`.
    pub u: f64,
    /// `P(U ≤ u)` under the null.
    pub p: f64,
    pub method: UMethod,
    /// `P(U = u)`; only known under the exact method.
    pub point_mass: Option<f64>,
    pub ties: bool,
    /// Every pooled value was identical; `p` is reported as 0.5.
    pub degenerate: bool,
}

/// Pooled midranks, doubled so they are integers.
fn doubled_midranks(x: &[f64], y: &[f64]) -> (Vec<u64>, bool) {
    let mut pooled: Vec<(f64, usize)> = x.iter().chain(y).copied().zip(0..).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = false;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i;
        while j + 1 < pooled.len() && pooled[j + 1].0 == pooled[i].0 {
            j += 1;
        }
        ties |= j > i;
        // Ranks i+1 ..= j+1 share the midrank (i + j + 2) / 2.
        for item in &pooled[i..=j] {
            ranks[item.1] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    (ranks, ties)
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::contract("Mann-Whitney U needs two non-empty samples"));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::contract("Mann-Whitney U received NaN"));
    }
    Ok(())
}

/// Mann-Whitney U test of `x < y`, choosing the method by sample size:
/// exact when both samples are below 20 or the smaller has at most 8
/// observations (and the pooled size stays small), normal otherwise.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<UTest> {
    let (m, n) = (x.len().min(y.len()), x.len() + y.len());
    let exact = (x.len() < 20 && y.len() < 20) || (m <= 8 && n <= 400);
    mann_whitney_u_with(x, y, if exact { UMethod::Exact } else { UMethod::Normal })
}

pub fn mann_whitney_u_with(x: &[f64], y: &[f64], method: UMethod) -> Result<UTest> {
    check(x, y)?;
    let (nx, ny) = (x.len(), y.len());
    let (ranks, ties) = doubled_midranks(x, y);
    let r2: u64 = ranks[..nx].iter().sum();
    let u = r2 as f64 / 2.0 - (nx * (nx + 1)) as f64 / 2.0;
    let degenerate = x.iter().chain(y).all(|v| *v == x[0]);
    if degenerate {
        return Ok(UTest { u, p: 0.5, method, point_mass: None, ties: true, degenerate });
    }
    let (p, point_mass) = match method {
        UMethod::Exact => {
            let (le, eq) = exact_rank_sum_cdf(&ranks, nx, r2);
            (le, Some(eq))
        }
        UMethod::Normal => (normal_p(u, nx, ny, &ranks)?, None),
    };
    Ok(UTest { u, p, method, point_mass, ties, degenerate })
}

/// `P(R ≤ r)` and `P(R = r)` for the sum of `k` doubled ranks drawn without
/// replacement from `ranks`, by dynamic programming over subset sizes.
fn exact_rank_sum_cdf(ranks: &[u64], k: usize, r: u64) -> (f64, f64) {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // counts[j][s]: subsets of size j with sum s.
    let mut counts = vec![vec![0.0f64; width]; k + 1];
    counts[0][0] = 1.0;
    let mut reach = 0usize;
    for &rv in ranks {
        let rv = rv as usize;
        reach += rv;
        for j in (1..=k).rev() {
            let (lo, hi) = counts.split_at_mut(j);
            let (prev, cur) = (&lo[j - 1], &mut hi[0]);
            for s in (rv..=reach.min(width - 1)).rev() {
                let add = prev[s - rv];
                if add != 0.0 {
                    cur[s] += add;
                }
            }
        }
    }
    let dist = &counts[k];
    let total: f64 = dist.iter().sum();
    let le: f64 = dist[..=r as usize].iter().sum();
    ((le / total).min(1.0), dist[r as usize] / total)
}

fn normal_p(u: f64, nx: usize, ny: usize, ranks: &[u64]) -> Result<f64> {
    let n = (nx + ny) as f64;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|r| **r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let (fx, fy) = (nx as f64, ny as f64);
    let var = fx * fy / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    let mean = fx * fy / 2.0;
    if !(var > 0.0) {
        return Ok(0.5);
    }
    let z = (u + 0.5 - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).map_err(|e| Error::numerical(e.to_string()))?;
    Ok(normal.cdf(z))
}

/// Terminal validation metrics of one run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Terminal {
    pub dap_mse: f64,
    pub dap_percent: f64,
    pub post_mse: f64,
    pub post_percent: f64,
}

/// Mean and sample standard deviation of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        Self { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variant: Variant,
    pub runs: usize,
    pub dap_mse: MeanSd,
    pub dap_percent: MeanSd,
    pub post_mse: MeanSd,
    pub post_percent: MeanSd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "DAP")]
    Dap,
    #[serde(rename = "Post-DAP")]
    PostDap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub less: Variant,
    pub greater: Variant,
    pub phase: Phase,
    pub test: UTest,
    /// Per-test significance level after correction.
    pub alpha: f64,
    pub reject: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub summary: Vec<SummaryRow>,
    pub tests: Vec<TestRow>,
}

/// The declared one-sided hypotheses, each tested per phase.
pub const HYPOTHESES: [(Variant, Variant); 2] = [(Variant::Cb, Variant::Cpe), (Variant::Cb, Variant::PgIrs)];

/// Summary table per variant and one-sided U tests on the terminal MSE.
///
/// `alpha` is the per-test level after Bonferroni correction over the
/// declared hypotheses, i.e. the family level divided by their number.
pub fn compare_variants(records: &BTreeMap<Variant, Vec<Terminal>>, alpha: f64) -> Result<Comparison> {
    let mut out = Comparison::default();
    for (variant, runs) in records {
        if runs.is_empty() {
            log::warn!("variant {variant} has no completed runs; omitted");
            continue;
        }
        let col = |f: fn(&Terminal) -> f64| MeanSd::of(&runs.iter().map(f).collect::<Vec<_>>());
        out.summary.push(SummaryRow {
            variant: *variant,
            runs: runs.len(),
            dap_mse: col(|t| t.dap_mse),
            dap_percent: col(|t| t.dap_percent),
            post_mse: col(|t| t.post_mse),
            post_percent: col(|t| t.post_percent),
        });
    }
    for (less, greater) in HYPOTHESES {
        let (Some(a), Some(b)) = (records.get(&less), records.get(&greater)) else {
            if records.contains_key(&less) || records.contains_key(&greater) {
                log::warn!("hypothesis {less} < {greater} skipped: a variant is missing");
            }
            continue;
        };
        if a.is_empty() || b.is_empty() {
            continue;
        }
        for (phase, f) in [(Phase::Dap, (|t: &Terminal| t.dap_mse) as fn(&Terminal) -> f64), (Phase::PostDap, |t: &Terminal| t.post_mse)] {
            let xa: Vec<f64> = a.iter().map(f).collect();
            let xb: Vec<f64> = b.iter().map(f).collect();
            let test = mann_whitney_u(&xa, &xb)?;
            out.tests.push(TestRow { less, greater, phase, test, alpha, reject: test.p < alpha });
        }
    }
    Ok(out)
}
