use ndarray::Array2;
use rand::Rng;

use super::{states_matrix, ModelConfig, Sample};
use crate::diffnet::{xavier_init_with, Mlp, ParamSet};
use crate::error::{Error, Result};
use crate::mathcore::{Gaussian, Mat4, Mat4x2, Vec2, Vec4, RIDGE};

/// Trunk output width: `A (16) | B¹ (16) | B² (16) | C (8) | o (4)`.
pub const TRUNK_OUTPUTS: usize = 60;
const OFF_B: usize = 16;
const OFF_C: usize = 48;
const OFF_O: usize = 56;

/// Local bilinear dynamics at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalLinear {
    pub a: Mat4,
    pub b: [Mat4; 2],
    pub c: Mat4x2,
    pub o: Vec4,
    pub identity_skip: bool,
}

impl LocalLinear {
    fn from_slice(v: &[f64], identity_skip: bool) -> Self {
        Self {
            a: Mat4::from_row_slice(&v[..OFF_B]),
            b: [
                Mat4::from_row_slice(&v[OFF_B..OFF_B + 16]),
                Mat4::from_row_slice(&v[OFF_B + 16..OFF_C]),
            ],
            c: Mat4x2::from_row_slice(&v[OFF_C..OFF_O]),
            o: Vec4::from_column_slice(&v[OFF_O..TRUNK_OUTPUTS]),
            identity_skip,
        }
    }

    /// `J = A + Σ a_ι Bᶥ` (plus `I` with the identity skip).
    pub fn jacobian(&self, a: &Vec2) -> Mat4 {
        let j = self.a + self.b[0] * a[0] + self.b[1] * a[1];
        if self.identity_skip {
            j + Mat4::identity()
        } else {
            j
        }
    }

    /// `A s + (Σ a_ι Bᶥ) s + C a + o`.
    pub fn mean(&self, s: &Vec4, a: &Vec2) -> Vec4 {
        self.jacobian(a) * s + self.c * a + self.o
    }

    /// `N(mean, J Σ Jᵀ + εI)` with `Σ = input_var * I`.
    pub fn dist(&self, s: &Vec4, a: &Vec2, input_var: f64) -> Gaussian<4> {
        let j = self.jacobian(a);
        let cov = j * j.transpose() * input_var + Mat4::identity() * RIDGE;
        Gaussian {
            mean: j * s + self.c * a + self.o,
            cov: (cov + cov.transpose()) * 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Body {
    Trunk(Mlp),
    /// Indices of the global `A, B, C, o` arrays.
    Global([usize; 4]),
}

/// Bilinear forward model `f(a, s) = A s + (Σ a_ι Bᶥ) s + C a + o`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardModel {
    pub params: ParamSet,
    body: Body,
    input_var: f64,
    identity_skip: bool,
}

impl ForwardModel {
    pub fn new<R: Rng>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        let mut params = ParamSet::new();
        let body = if cfg.state_dependent {
            Body::Trunk(Mlp::new(&mut params, "trunk", &cfg.layer_sizes(4, TRUNK_OUTPUTS), rng)?)
        } else {
            Body::Global([
                params.add("A", &[4, 4], xavier_init_with((4, 4), rng)?)?,
                params.add("B", &[2, 4, 4], xavier_init_with((8, 4), rng)?)?,
                params.add("C", &[4, 2], xavier_init_with((4, 2), rng)?)?,
                params.add("o", &[4], vec![0.0; 4])?,
            ])
        };
        Ok(Self {
            params,
            body,
            input_var: cfg.input_std * cfg.input_std,
            identity_skip: cfg.identity_skip,
        })
    }

    pub fn input_var(&self) -> f64 {
        self.input_var
    }

    /// Local dynamics at each state, in input order.
    pub fn local_linear_batch(&self, states: &[Vec4]) -> Result<Vec<LocalLinear>> {
        match &self.body {
            Body::Trunk(net) => {
                let out = net.forward(&self.params, states_matrix(states, states.len()).view());
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::numerical("forward-model trunk produced a non-finite output"));
                }
                Ok(out
                    .rows()
                    .into_iter()
                    .map(|r| LocalLinear::from_slice(r.as_slice().expect("row-major"), self.identity_skip))
                    .collect())
            }
            Body::Global(idx) => {
                let mut flat = Vec::with_capacity(TRUNK_OUTPUTS);
                for i in idx {
                    flat.extend_from_slice(&self.params.get(*i).value);
                }
                let ll = LocalLinear::from_slice(&flat, self.identity_skip);
                Ok(vec![ll; states.len()])
            }
        }
    }

    pub fn local_linear(&self, s: &Vec4) -> Result<LocalLinear> {
        Ok(self.local_linear_batch(std::slice::from_ref(s))?.remove(0))
    }

    pub fn fm_mean(&self, s: &Vec4, a: &Vec2) -> Result<Vec4> {
        Ok(self.local_linear(s)?.mean(s, a))
    }

    pub fn fm_dist(&self, s: &Vec4, a: &Vec2) -> Result<Gaussian<4>> {
        Ok(self.local_linear(s)?.dist(s, a, self.input_var))
    }

    /// Predicted next states for a batch.
    pub fn predict_batch(&self, batch: &[Sample]) -> Result<Vec<Vec4>> {
        let states: Vec<Vec4> = batch.iter().map(|x| x.s).collect();
        let lls = self.local_linear_batch(&states)?;
        Ok(lls.iter().zip(batch).map(|(ll, x)| ll.mean(&x.s, &x.a)).collect())
    }

    /// Mean over the batch of `|s' - f(a, s)|²`.
    pub fn loss(&self, batch: &[Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::contract("forward-model loss on an empty batch"));
        }
        let pred = self.predict_batch(batch)?;
        Ok(pred.iter().zip(batch).map(|(p, x)| (x.s_next - p).norm_squared()).sum::<f64>() / batch.len() as f64)
    }

    /// Per-sample squared errors.
    pub fn sample_errors(&self, batch: &[Sample]) -> Result<Vec<f64>> {
        let pred = self.predict_batch(batch)?;
        Ok(pred.iter().zip(batch).map(|(p, x)| (x.s_next - p).norm_squared()).collect())
    }

    /// Loss, with its gradient accumulated into `self.params`.
    pub fn loss_and_grad(&mut self, batch: &[Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::contract("forward-model loss on an empty batch"));
        }
        let n = batch.len() as f64;
        match self.body.clone() {
            Body::Trunk(net) => {
                let x = states_matrix(batch.iter().map(|b| &b.s), batch.len());
                let cache = net.forward_cached(&self.params, x.view());
                let out = cache.output();
                if out.iter().any(|v| !v.is_finite()) {
                    return Err(Error::numerical("forward-model trunk produced a non-finite output"));
                }
                let mut d_out = Array2::zeros((batch.len(), TRUNK_OUTPUTS));
                let mut loss = 0.0;
                for (i, x) in batch.iter().enumerate() {
                    let ll = LocalLinear::from_slice(out.row(i).as_slice().expect("row-major"), self.identity_skip);
                    let err = ll.mean(&x.s, &x.a) - x.s_next;
                    loss += err.norm_squared();
                    let g = err * (2.0 / n);
                    let row = d_out.row_mut(i);
                    write_local_grad(row.into_slice().expect("row-major"), &g, &x.s, &x.a);
                }
                net.backward(&mut self.params, &cache, d_out.view());
                Ok(loss / n)
            }
            Body::Global(idx) => {
                let lls = self.local_linear_batch(&[Vec4::zeros()])?;
                let ll = &lls[0];
                let mut grad = vec![0.0; TRUNK_OUTPUTS];
                let mut loss = 0.0;
                for x in batch {
                    let err = ll.mean(&x.s, &x.a) - x.s_next;
                    loss += err.norm_squared();
                    write_local_grad(&mut grad, &(err * (2.0 / n)), &x.s, &x.a);
                }
                let mut off = 0;
                for i in idx {
                    let p = self.params.get_mut(i);
                    let len = p.grad.len();
                    p.grad.iter_mut().zip(&grad[off..off + len]).for_each(|(g, d)| *g += d);
                    off += len;
                }
                Ok(loss / n)
            }
        }
    }
}

/// Accumulates `∂(gᵀ mean)/∂(A, B, C, o)` into a trunk-layout slice.
fn write_local_grad(out: &mut [f64], g: &Vec4, s: &Vec4, a: &Vec2) {
    for i in 0..4 {
        for j in 0..4 {
            let gs = g[i] * s[j];
            out[i * 4 + j] += gs;
            out[OFF_B + i * 4 + j] += a[0] * gs;
            out[OFF_B + 16 + i * 4 + j] += a[1] * gs;
        }
        out[OFF_C + i * 2] += g[i] * a[0];
        out[OFF_C + i * 2 + 1] += g[i] * a[1];
        out[OFF_O + i] += g[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffnet::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_batch(rng: &mut ChaCha8Rng, n: usize) -> Vec<Sample> {
        (0..n)
            .map(|_| Sample {
                s: Vec4::new(rng.gen(), rng.gen(), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                a: Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
                s_next: Vec4::new(rng.gen(), rng.gen(), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            })
            .collect()
    }

    fn random_ll(rng: &mut ChaCha8Rng, skip: bool) -> LocalLinear {
        let v: Vec<f64> = (0..TRUNK_OUTPUTS).map(|_| rng.gen_range(-1.0..1.0)).collect();
        LocalLinear::from_slice(&v, skip)
    }

    #[test]
    fn zero_trunk_outputs_only_offset() {
        let cfg = ModelConfig { identity_skip: false, ..ModelConfig::default() };
        let mut fm = ForwardModel::new(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for p in fm.params.entries_mut() {
            p.value.iter_mut().for_each(|v| *v = 0.0);
        }
        // The last bias is the trunk's constant output; set the o block.
        let last = fm.params.entries().len() - 1;
        let o = [0.1, 0.2, 0.3, 0.4];
        fm.params.get_mut(last).value[OFF_O..].copy_from_slice(&o);
        let out = fm.fm_mean(&Vec4::new(0.3, 0.6, 0.1, -0.2), &Vec2::new(1.2, -0.4)).unwrap();
        assert_eq!(out, Vec4::from(o));
    }

    #[test]
    fn zero_action_ignores_b_and_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ll = random_ll(&mut rng, false);
        let s = Vec4::new(0.2, 0.4, 0.5, -0.5);
        let mut other = ll.clone();
        other.b = [Mat4::identity() * 7.0, Mat4::zeros()];
        other.c = Mat4x2::repeat(3.0);
        let zero = Vec2::zeros();
        assert_eq!(ll.mean(&s, &zero), ll.a * s + ll.o);
        assert_eq!(ll.mean(&s, &zero), other.mean(&s, &zero));
    }

    #[test]
    fn action_dependent_part_is_bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ll = random_ll(&mut rng, false);
        let s = Vec4::new(0.7, 0.1, -0.3, 0.2);
        let a = Vec2::new(0.8, -1.6);
        let diff = ll.mean(&s, &(a * 2.0)) - ll.mean(&s, &a);
        let direct = (ll.b[0] * a[0] + ll.b[1] * a[1]) * s + ll.c * a;
        assert!((diff - direct).amax() < 1e-14);
    }

    #[test]
    fn covariance_is_the_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for skip in [false, true] {
            let ll = random_ll(&mut rng, skip);
            let s = Vec4::new(0.3, 0.3, 0.1, 0.0);
            let a = Vec2::new(-0.4, 1.2);
            let g = ll.dist(&s, &a, 1e-4);
            let mut j = ll.a + ll.b[0] * a[0] + ll.b[1] * a[1];
            if skip {
                j += Mat4::identity();
            }
            let oracle = j * (Mat4::identity() * 1e-4) * j.transpose() + Mat4::identity() * RIDGE;
            assert!((g.cov - oracle).amax() < 1e-12);
            // a = 0 reduces J to A.
            let g0 = ll.dist(&s, &Vec2::zeros(), 1e-4);
            let a0 = if skip { ll.a + Mat4::identity() } else { ll.a };
            assert!((g0.cov - (a0 * a0.transpose() * 1e-4 + Mat4::identity() * RIDGE)).amax() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_jacobian_keeps_unit_covariance() {
        let mut ll = random_ll(&mut ChaCha8Rng::seed_from_u64(4), false);
        let h = crate::mathcore::householder_matrix(&Vec4::new(1.0, 2.0, -1.0, 0.5)).unwrap();
        ll.a = h;
        let g = ll.dist(&Vec4::zeros(), &Vec2::zeros(), 1.0);
        assert!((g.cov - Mat4::identity() * (1.0 + RIDGE)).amax() < 1e-12);
    }

    #[test]
    fn loss_arithmetic() {
        let cfg = ModelConfig::default();
        let fm = ForwardModel::new(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let s = Vec4::new(0.5, 0.5, 0.0, 0.0);
        let a = Vec2::new(0.4, 0.0);
        let pred = fm.fm_mean(&s, &a).unwrap();
        assert_eq!(fm.loss(&[Sample { s, a, s_next: pred }]).unwrap(), 0.0);
        let off = pred + Vec4::new(1.0, 0.0, 0.0, 0.0);
        assert!((fm.loss(&[Sample { s, a, s_next: off }]).unwrap() - 1.0).abs() < 1e-12);
        assert!(fm.loss(&[]).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for state_dependent in [true, false] {
            let cfg = ModelConfig { hidden: vec![16, 16], state_dependent, ..ModelConfig::default() };
            let fm = ForwardModel::new(&cfg, &mut rng).unwrap();
            let batch = random_batch(&mut rng, 6);
            let err = grad_check(&fm.params, |p| {
                let mut m = fm.clone();
                m.params = p.clone();
                let l = m.loss_and_grad(&batch)?;
                *p = m.params;
                Ok(l)
            })
            .unwrap();
            assert!(err < 1e-4, "state_dependent={state_dependent}: {err}");
        }
    }
}
