//! Invariant suite behind `hhvg selftest`.
//!
//! Each check is a plain function returning a one-line detail on success and
//! a description of the first violation on failure, so the same code serves
//! the command line, the test suite and the acceptance run at different
//! budgets.

use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::diffnet::grad_check;
use crate::mathcore::{
    discrete_hetero_decomposition, gaussian_kl, householder_cov, householder_matrix, DiscreteJoint, Gaussian,
    HouseholderCovParams, Mat4, Precision, Vec2, Vec4,
};
use crate::harness::{mann_whitney_u_with, UMethod};
use crate::models::{ForwardModel, MetaModel, ModelConfig, PolicyNet, Sample, ValueNet};

pub type Check = std::result::Result<String, String>;

/// A KL implementation under test.
pub type KlFn = fn(&Gaussian<4>, &Gaussian<4>) -> crate::Result<f64>;

/// Sizes of the individual checks.
#[derive(Clone, Debug)]
pub struct Budget {
    pub kl_cases: usize,
    pub mc_samples: usize,
    pub mc_rel_tol: f64,
    pub householder_cases: usize,
    pub grad_instances: usize,
    pub grad_hidden: Vec<usize>,
    pub decomposition_cases: usize,
    pub u_cases: usize,
}

impl Budget {
    /// A few seconds; what `hhvg selftest` runs.
    pub fn quick() -> Self {
        Self {
            kl_cases: 20,
            mc_samples: 100_000,
            mc_rel_tol: 0.03,
            householder_cases: 1000,
            grad_instances: 5,
            grad_hidden: vec![16, 16],
            decomposition_cases: 1000,
            u_cases: 200,
        }
    }

    /// Full-strength thresholds.
    pub fn full() -> Self {
        Self {
            kl_cases: 20,
            mc_samples: 1_000_000,
            mc_rel_tol: 0.01,
            householder_cases: 1000,
            grad_instances: 20,
            grad_hidden: ModelConfig::default().hidden,
            decomposition_cases: 1000,
            u_cases: 1000,
        }
    }
}

pub const GRAD_TOL: f64 = 1e-4;
pub const HOUSEHOLDER_TOL: f64 = 1e-10;
pub const DECOMPOSITION_TOL: f64 = 1e-9;
pub const ENUMERATION_TOL: f64 = 1e-12;
pub const NORMAL_TOL: f64 = 0.01;

fn random_gaussian(rng: &mut ChaCha8Rng) -> Gaussian<4> {
    let mean = Vec4::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    let l = Mat4::from_fn(|_, _| 0.5 * rng.sample::<f64, _>(StandardNormal));
    let cov = l * l.transpose() + Mat4::identity() * 0.1;
    Gaussian::new(mean, cov).expect("positive definite by construction")
}

fn log_density(x: &Vec4, mean: &Vec4, prec: &Precision<4>) -> f64 {
    let d = x - mean;
    -0.5 * (4.0 * (2.0 * std::f64::consts::PI).ln() + prec.log_det + d.dot(&(prec.inv * d)))
}

/// Non-negativity, zero self-divergence and Monte-Carlo agreement of `kl`.
pub fn kl_properties(kl: KlFn, cases: usize, mc_samples: usize, rel_tol: f64, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let err = |e: crate::Error| e.to_string();
    for i in 0..10 * cases {
        let (p, q) = (random_gaussian(&mut rng), random_gaussian(&mut rng));
        let k = kl(&p, &q).map_err(err)?;
        if !(k >= 0.0) {
            return Err(format!("case {i}: KL = {k:e} is negative"));
        }
        let s = kl(&p, &p).map_err(err)?;
        if s.abs() > 1e-9 {
            return Err(format!("case {i}: KL(p, p) = {s:e}"));
        }
    }
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (p, q) = (random_gaussian(&mut rng), random_gaussian(&mut rng));
        let k = kl(&p, &q).map_err(err)?;
        let pp = Precision::of(&p, "p").map_err(err)?;
        let pq = Precision::of(&q, "q").map_err(err)?;
        let chol = p.regularized_cov().cholesky().ok_or("sampling covariance is not positive definite")?;
        let l = chol.l();
        let mut sum = 0.0;
        for _ in 0..mc_samples {
            let z = Vec4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
            let x = p.mean + l * z;
            sum += log_density(&x, &p.mean, &pp) - log_density(&x, &q.mean, &pq);
        }
        let mc = sum / mc_samples as f64;
        let rel = (mc - k).abs() / k.abs().max(1e-12);
        if rel > rel_tol {
            return Err(format!("case {i}: closed form {k:.6} vs Monte-Carlo {mc:.6} (relative {rel:.2e})"));
        }
        worst = worst.max(rel);
    }
    Ok(format!("{} sign cases, {cases} MC cases at {mc_samples} samples, worst relative gap {worst:.2e}", 10 * cases))
}

/// `H Hᵀ = I` and the spectrum of `H D Hᵀ` equals `d`.
pub fn householder_orthogonality(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let v = Vec4::from_fn(|_, _| rng.gen_range(-3.0..3.0));
        if v.norm() < 1e-3 {
            continue;
        }
        let h = householder_matrix(&v).map_err(|e| e.to_string())?;
        let dev = (h * h.transpose() - Mat4::identity()).abs().max();
        let d = Vec4::from_fn(|_, _| rng.gen_range(0.01..5.0));
        let cov = householder_cov(&HouseholderCovParams { d, v }).map_err(|e| e.to_string())?;
        let mut eig: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
        let mut want: Vec<f64> = d.iter().copied().collect();
        eig.sort_by(f64::total_cmp);
        want.sort_by(f64::total_cmp);
        let spec = eig.iter().zip(&want).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
        if dev > HOUSEHOLDER_TOL || spec > 1e-9 {
            return Err(format!("case {i}: |HHᵀ - I| = {dev:e}, spectrum gap {spec:e}"));
        }
        worst = worst.max(dev);
    }
    Ok(format!("{cases} cases, worst |HHᵀ - I| {worst:.1e}"))
}

fn random_states(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec4> {
    (0..n)
        .map(|_| Vec4::new(rng.gen(), rng.gen(), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)))
        .collect()
}

fn random_actions(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec2> {
    (0..n).map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

/// Worst finite-difference relative error of each loss, in the order
/// forward model, meta-model, value, policy.
pub fn gradient_errors(hidden: &[usize], instances: usize, seed: u64) -> crate::Result<[f64; 4]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig { hidden: hidden.to_vec(), ..ModelConfig::default() };
    let mut worst = [0.0f64; 4];
    for _ in 0..instances {
        let n = rng.gen_range(2..6);
        let states = random_states(&mut rng, n);
        let actions = random_actions(&mut rng, n);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();

        let fm = ForwardModel::new(&cfg, &mut rng)?;
        let batch: Vec<Sample> = states
            .iter()
            .zip(&actions)
            .map(|(s, a)| Sample { s: *s, a: *a, s_next: s + Vec4::from_fn(|_, _| 0.05 * rng.sample::<f64, _>(StandardNormal)) })
            .collect();
        let e = grad_check(&fm.params, |p| {
            let mut m = fm.clone();
            m.params = p.clone();
            let l = m.loss_and_grad(&batch)?;
            *p = m.params;
            Ok(l)
        })?;
        worst[0] = worst[0].max(e);

        let mm = MetaModel::new(&cfg, &mut rng)?;
        let e = grad_check(&mm.params, |p| {
            let mut m = mm.clone();
            m.params = p.clone();
            let l = m.devaluation_loss_and_grad(&fm, &states, &actions, &weights)?;
            *p = m.params;
            Ok(l)
        })?;
        worst[1] = worst[1].max(e);

        let vf = ValueNet::new(&cfg, &mut rng)?;
        let targets: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = grad_check(&vf.params, |p| {
            let mut m = vf.clone();
            m.params = p.clone();
            let l = m.loss_and_grad(&states, &targets, &weights)?;
            *p = m.params;
            Ok(l)
        })?;
        worst[2] = worst[2].max(e);

        let actions_n = rng.gen_range(3..10);
        let ap = PolicyNet::new(&cfg, actions_n, &mut rng)?;
        let q = Array2::from_shape_fn((n, actions_n), |_| rng.gen_range(-1.0..1.0));
        let e = grad_check(&ap.params, |p| {
            let mut m = ap.clone();
            m.params = p.clone();
            let l = m.loss_and_grad(&states, &q, &weights)?;
            *p = m.params;
            Ok(l)
        })?;
        worst[3] = worst[3].max(e);
    }
    Ok(worst)
}

pub fn gradient_fidelity(hidden: &[usize], instances: usize, seed: u64) -> Check {
    let w = gradient_errors(hidden, instances, seed).map_err(|e| e.to_string())?;
    let names = ["L_fm", "L_mm", "L_vf", "L_ap"];
    let detail = names.iter().zip(&w).map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    if w.iter().all(|e| *e <= GRAD_TOL) {
        Ok(format!("{instances} instances each: {detail}"))
    } else {
        Err(format!("relative error above {GRAD_TOL:e}: {detail}"))
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0f64..3.0).exp()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// `I_Q(S':A|s) = I(S':A|s) + KL[P(s'|s) ‖ Q(s'|s)]` on random discrete joints.
pub fn decomposition_identity(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for i in 0..cases {
        let (ns, na, nn) = (rng.gen_range(1..4), rng.gen_range(1..6), rng.gen_range(2..7));
        let joint = DiscreteJoint {
            p_next: (0..ns).map(|_| (0..na).map(|_| random_simplex(&mut rng, nn)).collect()).collect(),
            policy: (0..ns).map(|_| random_simplex(&mut rng, na)).collect(),
            reference: (0..ns).map(|_| random_simplex(&mut rng, nn)).collect(),
        };
        for t in discrete_hetero_decomposition(&joint).map_err(|e| e.to_string())? {
            let gap = (t.lhs - t.mi_term - t.kl_term).abs();
            if !(gap <= DECOMPOSITION_TOL) {
                return Err(format!("case {i}: identity gap {gap:e}"));
            }
            worst = worst.max(gap);
        }
    }
    Ok(format!("{cases} instances, worst gap {worst:.1e}"))
}

/// `P(U ≤ u)` by listing every assignment of the pooled values to `x`.
pub fn enumerated_u_cdf(x: &[f64], y: &[f64]) -> f64 {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let u_of = |xs: &[f64], ys: &[f64]| -> f64 {
        let mut u = 0.0;
        for a in xs {
            for b in ys {
                u += if a > b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        u
    };
    let obs = u_of(x, y);
    let n = pooled.len();
    let (mut le, mut total) = (0u64, 0u64);
    for mask in 0u32..(1u32 << n) {
        if mask.count_ones() as usize != x.len() {
            continue;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for (i, v) in pooled.iter().enumerate() {
                if mask >> i & 1 == 1 { xs.push(*v) } else { ys.push(*v) }
            }
            (xs, ys)
        };
        total += 1;
        le += u64::from(u_of(&xs, &ys) <= obs + 1e-9);
    }
    le as f64 / total as f64
}

/// Exact p-values against enumeration for samples up to 8, and the normal
/// approximation against the exact value at 8 vs 8 without ties.
pub fn u_test_enumeration(cases: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_exact = 0.0f64;
    let mut worst_normal = 0.0f64;
    for i in 0..cases {
        let (nx, ny) = (rng.gen_range(1..=8), rng.gen_range(1..=8));
        let levels = rng.gen_range(2..12);
        let x: Vec<f64> = (0..nx).map(|_| f64::from(rng.gen_range(0..levels))).collect();
        let y: Vec<f64> = (0..ny).map(|_| f64::from(rng.gen_range(0..levels))).collect();
        if x.iter().chain(&y).all(|v| *v == x[0]) {
            continue;
        }
        let t = mann_whitney_u_with(&x, &y, UMethod::Exact).map_err(|e| e.to_string())?;
        let gap = (t.p - enumerated_u_cdf(&x, &y)).abs();
        if gap > ENUMERATION_TOL {
            return Err(format!("case {i}: exact p {} off enumeration by {gap:e}", t.p));
        }
        worst_exact = worst_exact.max(gap);

        let x: Vec<f64> = (0..8).map(|_| rng.gen()).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.gen::<f64>() + 0.3).collect();
        let e = mann_whitney_u_with(&x, &y, UMethod::Exact).map_err(|e| e.to_string())?;
        let a = mann_whitney_u_with(&x, &y, UMethod::Normal).map_err(|e| e.to_string())?;
        let gap = (e.p - a.p).abs();
        if gap > NORMAL_TOL {
            return Err(format!("case {i}: normal p {} vs exact {} at 8 vs 8", a.p, e.p));
        }
        worst_normal = worst_normal.max(gap);
    }
    Ok(format!("{cases} cases, exact gap {worst_exact:.1e}, normal gap {worst_normal:.1e}"))
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub name: &'static str,
    pub outcome: Check,
    pub duration: Duration,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }
}

fn timed(name: &'static str, f: impl FnOnce() -> Check) -> SuiteResult {
    let start = Instant::now();
    let outcome = f();
    SuiteResult { name, outcome, duration: start.elapsed() }
}

/// Runs every suite with the production KL.
pub fn run_all(budget: &Budget) -> Vec<SuiteResult> {
    run_all_with(budget, gaussian_kl::<4>)
}

/// As [`run_all`] with a substitute KL, so a broken implementation can be
/// shown to fail.
pub fn run_all_with(b: &Budget, kl: KlFn) -> Vec<SuiteResult> {
    vec![
        timed("gaussian_kl", || kl_properties(kl, b.kl_cases, b.mc_samples, b.mc_rel_tol, 11)),
        timed("householder", || householder_orthogonality(b.householder_cases, 12)),
        timed("gradients", || gradient_fidelity(&b.grad_hidden, b.grad_instances, 13)),
        timed("decomposition", || decomposition_identity(b.decomposition_cases, 14)),
        timed("mann_whitney_u", || u_test_enumeration(b.u_cases, 15)),
    ]
}

/// Fixed-width pass/fail table.
pub fn report(results: &[SuiteResult]) -> String {
    let mut out = format!("{:<16} {:<6} {:>10}  detail\n", "suite", "result", "seconds");
    for r in results {
        let (tag, detail) = match &r.outcome {
            Ok(d) => ("pass", d),
            Err(d) => ("FAIL", d),
        };
        out.push_str(&format!("{:<16} {:<6} {:>10.3}  {}\n", r.name, tag, r.duration.as_secs_f64(), detail));
    }
    out
}
