use hhvg::diffnet::ParamSet;
use hhvg::mathcore::{Vec2, Vec4};
use hhvg::models::{ForwardModel, MetaModel, ModelConfig, PolicyNet, ValueNet, COV_FLOOR};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small() -> ModelConfig {
    ModelConfig { hidden: vec![8, 8], ..ModelConfig::default() }
}

fn states(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec4> {
    (0..n).map(|_| Vec4::new(rng.gen(), rng.gen(), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5))).collect()
}

fn last_bias<'a>(p: &'a mut ParamSet, prefix: &str) -> &'a mut Vec<f64> {
    let entry = p.entries_mut().iter_mut().rev().find(|e| e.name.starts_with(prefix) && e.name.ends_with(".b")).unwrap();
    &mut entry.value
}

#[test]
fn meta_model_scales_bottom_out_at_the_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut mm = MetaModel::new(&small(), &mut rng).unwrap();
    last_bias(&mut mm.params, "meta")[4..8].iter_mut().for_each(|b| *b = -1000.0);
    for o in mm.outputs_batch(&states(&mut rng, 10)).unwrap() {
        for d in o.hh.d.iter() {
            assert!(*d >= COV_FLOOR && *d < COV_FLOOR * (1.0 + 1e-9), "{d}");
        }
        let eig = o.dist().unwrap().cov.symmetric_eigenvalues();
        assert!(eig.iter().all(|e| *e > 0.5 * COV_FLOOR));
    }
}

#[test]
fn zero_logits_give_the_uniform_policy_and_shifts_change_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pi = PolicyNet::new(&small(), 121, &mut rng).unwrap();
    let s = states(&mut rng, 5);
    let before = pi.probs_batch(&s).unwrap();
    last_bias(&mut pi.params, "policy").iter_mut().for_each(|b| *b += 37.5);
    let shifted = pi.probs_batch(&s).unwrap();
    for (a, b) in before.iter().zip(&shifted) {
        assert!((a - b).abs() < 1e-14);
    }
    for p in pi.params.entries_mut() {
        p.value.iter_mut().for_each(|v| *v = 0.0);
    }
    let uniform = pi.probs_batch(&s).unwrap();
    assert!(uniform.iter().all(|p| (p - 1.0 / 121.0).abs() < 1e-15));
}

#[test]
fn clipping_rescales_norm_100_to_10_and_keeps_direction() {
    let mut p = ParamSet::new();
    p.add("a", &[2], vec![0.0; 2]).unwrap();
    p.add("b", &[2], vec![0.0; 2]).unwrap();
    let g = [60.0, 0.0, 0.0, 80.0];
    for k in 0..4 {
        let (e, i) = (k / 2, k % 2);
        p.get_mut(e).grad[i] = g[k];
    }
    assert!((p.grad_norm() - 100.0).abs() < 1e-12);
    p.clip_grad_norm(10.0);
    assert!((p.grad_norm() - 10.0).abs() < 1e-12);
    let flat = p.flat_grads();
    for k in 0..4 {
        assert!((flat[k] - g[k] / 10.0).abs() < 1e-12);
    }
    p.clip_grad_norm(20.0);
    assert!((p.grad_norm() - 10.0).abs() < 1e-12);
}

/// The weighted batch gradient equals the weighted sum of single-sample
/// gradients divided by the batch size.
fn assert_weighted_decomposition<F>(params: &ParamSet, n: usize, weights: &[f64], mut grad_of: F)
where
    F: FnMut(&[usize], &[f64]) -> Vec<f64>,
{
    let idx: Vec<usize> = (0..n).collect();
    let batch = grad_of(&idx, weights);
    let mut oracle = vec![0.0; params.num_scalars()];
    for i in 0..n {
        let g = grad_of(&[i], &[1.0]);
        oracle.iter_mut().zip(&g).for_each(|(o, g)| *o += weights[i] * g / n as f64);
    }
    let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in batch.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-10 * scale.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn weighted_gradients_decompose_per_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = small();
    let n = 6;
    let s = states(&mut rng, n);
    let a: Vec<Vec2> = (0..n).map(|_| Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();

    let vf = ValueNet::new(&cfg, &mut rng).unwrap();
    let y: Vec<f64> = (0..n).map(|_| rng.gen()).collect();
    assert_weighted_decomposition(&vf.params, n, &w, |idx, ww| {
        let mut m = vf.clone();
        m.params.zero_grad();
        let ss: Vec<Vec4> = idx.iter().map(|i| s[*i]).collect();
        let yy: Vec<f64> = idx.iter().map(|i| y[*i]).collect();
        m.loss_and_grad(&ss, &yy, ww).unwrap();
        m.params.flat_grads()
    });

    let pi = PolicyNet::new(&cfg, 7, &mut rng).unwrap();
    let q = Array2::from_shape_fn((n, 7), |_| rng.gen_range(-1.0..1.0));
    assert_weighted_decomposition(&pi.params, n, &w, |idx, ww| {
        let mut m = pi.clone();
        m.params.zero_grad();
        let ss: Vec<Vec4> = idx.iter().map(|i| s[*i]).collect();
        let qq = Array2::from_shape_fn((idx.len(), 7), |(r, c)| q[[idx[r], c]]);
        m.loss_and_grad(&ss, &qq, ww).unwrap();
        m.params.flat_grads()
    });

    let fm = ForwardModel::new(&cfg, &mut rng).unwrap();
    let mm = MetaModel::new(&cfg, &mut rng).unwrap();
    assert_weighted_decomposition(&mm.params, n, &w, |idx, ww| {
        let mut m = mm.clone();
        m.params.zero_grad();
        let ss: Vec<Vec4> = idx.iter().map(|i| s[*i]).collect();
        let aa: Vec<Vec2> = idx.iter().map(|i| a[*i]).collect();
        m.devaluation_loss_and_grad(&fm, &ss, &aa, ww).unwrap();
        m.params.flat_grads()
    });
}

#[test]
fn policy_gradient_matches_score_function_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = 5;
    let mut pi = PolicyNet::new(&small(), k, &mut rng).unwrap();
    let s = states(&mut rng, 1);
    let q: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    pi.params.zero_grad();
    pi.loss_and_grad(&s, &Array2::from_shape_vec((1, k), q.clone()).unwrap(), &[1.0]).unwrap();
    let exact = pi.params.flat_grads();

    // ∇ log π(a) from the gradient of -π(a): the loss with q = e_a.
    let probs = pi.probs_batch(&s).unwrap();
    let score: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let mut m = pi.clone();
            m.params.zero_grad();
            let onehot = Array2::from_shape_fn((1, k), |(_, c)| if c == a { 1.0 } else { 0.0 });
            m.loss_and_grad(&s, &onehot, &[1.0]).unwrap();
            m.params.flat_grads().iter().map(|g| -g / probs[[0, a]]).collect()
        })
        .collect();
    let samples = 400_000;
    let mut est = vec![0.0; exact.len()];
    let cdf: Vec<f64> = probs.row(0).iter().scan(0.0, |c, p| {
        *c += p;
        Some(*c)
    }).collect();
    for _ in 0..samples {
        let u: f64 = rng.gen();
        let a = cdf.iter().position(|c| u < *c).unwrap_or(k - 1);
        est.iter_mut().zip(&score[a]).for_each(|(e, g)| *e -= q[a] * g / samples as f64);
    }
    let norm = exact.iter().map(|g| g * g).sum::<f64>().sqrt();
    let err = exact.iter().zip(&est).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(err < 0.05 * norm, "relative error {}", err / norm);
}
