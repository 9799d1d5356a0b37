use crate::error::{Error, Result};
use crate::mathcore::Vec4;
use crate::models::{ForwardModel, Sample};

/// Points examined exhaustively by the diameter estimator.
pub const DIAMETER_SUBSAMPLE: usize = 4096;

/// Exact maximum pairwise Euclidean distance, `O(n²)`.
pub fn max_pairwise_distance(points: &[Vec4]) -> f64 {
    let mut best = 0.0f64;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.max((p - q).norm_squared());
        }
    }
    best.sqrt()
}

/// Diameter estimate, always a lower bound on the exact value: exact over an
/// evenly strided subsample of at most [`DIAMETER_SUBSAMPLE`] points plus the
/// extremes along each axis and each sign diagonal, refined by one
/// farthest-point sweep over all points from every extreme.
pub fn estimate_diameter(points: &[Vec4]) -> f64 {
    if points.len() <= DIAMETER_SUBSAMPLE + 24 {
        return max_pairwise_distance(points);
    }
    let stride = points.len() as f64 / DIAMETER_SUBSAMPLE as f64;
    let mut pick: Vec<Vec4> = (0..DIAMETER_SUBSAMPLE).map(|i| points[(i as f64 * stride) as usize]).collect();
    let mut dirs: Vec<Vec4> = (0..4).map(|k| Vec4::ith(k, 1.0)).collect();
    for signs in 0..8u32 {
        dirs.push(Vec4::from_fn(|k, _| if k > 0 && signs >> (k - 1) & 1 == 1 { -1.0 } else { 1.0 }));
    }
    let mut extremes = Vec::with_capacity(2 * dirs.len());
    for d in &dirs {
        let key = |p: &&Vec4| p.dot(d);
        extremes.push(*points.iter().min_by(|a, b| key(a).total_cmp(&key(b))).expect("non-empty"));
        extremes.push(*points.iter().max_by(|a, b| key(a).total_cmp(&key(b))).expect("non-empty"));
    }
    let mut best = 0.0f64;
    for e in &extremes {
        for p in points {
            best = best.max((p - e).norm_squared());
        }
    }
    pick.extend(extremes);
    max_pairwise_distance(&pick).max(best.sqrt())
}

/// Validation error of a forward model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    /// Mean over rows of `|s' - f(a, s)|²`.
    pub mse: f64,
    /// `100 * sqrt(mse) / diameter`.
    pub percent: f64,
}

/// `100 * RMSE / diameter` against a precomputed diameter of the targets.
pub fn error_percentage_with(model: &ForwardModel, rows: &[Sample], diameter: f64) -> Result<ErrorReport> {
    if rows.is_empty() {
        return Err(Error::contract("empty validation set"));
    }
    if !(diameter > 0.0) {
        return Err(Error::contract(format!("validation diameter must be positive, got {diameter}")));
    }
    let mut total = 0.0;
    for chunk in rows.chunks(4096) {
        total += model.sample_errors(chunk)?.iter().sum::<f64>();
    }
    let mse = total / rows.len() as f64;
    Ok(ErrorReport { mse, percent: 100.0 * mse.sqrt() / diameter })
}

/// `100 * RMSE / D_max` with `D_max` estimated from the validation targets.
pub fn error_percentage(model: &ForwardModel, rows: &[Sample]) -> Result<ErrorReport> {
    if rows.len() < 2 {
        return Err(Error::contract("error percentage needs at least two validation rows"));
    }
    let targets: Vec<Vec4> = rows.iter().map(|r| r.s_next).collect();
    error_percentage_with(model, rows, estimate_diameter(&targets))
}
