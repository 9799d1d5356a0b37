use super::ParamSet;
use crate::error::{Error, Result};

/// Step of the fourth-order central difference. Large enough that rounding
/// in losses of order 10 stays far below the tolerance on small entries.
pub const FD_STEP: f64 = 1e-3;

/// Denominator floor of the relative error, so entries whose true gradient is
/// zero are judged on absolute error instead.
pub const REL_FLOOR: f64 = 1e-6;

/// Worst relative error between analytic and central-difference gradients.
///
/// `f` must return the loss at the given parameters and accumulate its
/// analytic gradient into their `grad` buffers.
pub fn grad_check<F>(params: &ParamSet, f: F) -> Result<f64>
where
    F: FnMut(&mut ParamSet) -> Result<f64>,
{
    let n = params.num_scalars();
    grad_check_coords(params, f, 0..n)
}

/// As [`grad_check`], restricted to the listed flat scalar indices.
pub fn grad_check_coords<F, I>(params: &ParamSet, mut f: F, coords: I) -> Result<f64>
where
    F: FnMut(&mut ParamSet) -> Result<f64>,
    I: IntoIterator<Item = usize>,
{
    let mut work = params.clone();
    work.zero_grad();
    let loss = f(&mut work)?;
    if !loss.is_finite() {
        return Err(Error::numerical(format!("non-finite loss {loss}")));
    }
    let analytic = work.flat_grads();
    let mut worst = 0.0f64;
    let mut probe = params.clone();
    for k in coords {
        let orig = *probe.scalar_mut(k);
        let mut at = |d: f64| -> Result<f64> {
            *probe.scalar_mut(k) = orig + d;
            let v = f(&mut probe)?;
            if !v.is_finite() {
                return Err(Error::numerical("non-finite loss under perturbation"));
            }
            Ok(v)
        };
        let (h, h2) = (at(FD_STEP)? - at(-FD_STEP)?, at(2.0 * FD_STEP)? - at(-2.0 * FD_STEP)?);
        *probe.scalar_mut(k) = orig;
        let numeric = (8.0 * h - h2) / (12.0 * FD_STEP);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max(rel);
    }
    Ok(worst)
}
