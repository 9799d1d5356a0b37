use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{even_levels as levels, step_accel, EnvConfig, State};
use crate::error::{Error, Result};

/// Number of `f64` values per dataset row: `s (4), a (2), s' (4)`.
pub const DATASET_ROW_LEN: usize = 10;

/// Level counts per dimension `(x, y, vx, vy, ax, ay)` and the velocity interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleGridSpec {
    pub counts: [usize; 6],
    pub velocity_range: [f64; 2],
}

impl OracleGridSpec {
    pub fn full() -> Self {
        Self { counts: [49, 49, 11, 11, 11, 11], velocity_range: [-1.0, 1.0] }
    }

    pub fn desk() -> Self {
        Self { counts: [17, 17, 7, 7, 7, 7], velocity_range: [-1.0, 1.0] }
    }

    pub fn rows(&self) -> usize {
        self.counts.iter().product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleRow {
    pub s: State,
    pub a: [f64; 2],
    pub s_next: State,
}

impl OracleRow {
    pub fn to_array(&self) -> [f64; DATASET_ROW_LEN] {
        let s = self.s.to_array();
        let n = self.s_next.to_array();
        [s[0], s[1], s[2], s[3], self.a[0], self.a[1], n[0], n[1], n[2], n[3]]
    }

    pub fn from_array(v: &[f64; DATASET_ROW_LEN]) -> Self {
        Self {
            s: State::from_array([v[0], v[1], v[2], v[3]]),
            a: [v[4], v[5]],
            s_next: State::from_array([v[6], v[7], v[8], v[9]]),
        }
    }
}

/// Exhaustive state-action grid with unbiased occupancy. Rows are produced
/// in row-major order over `(x, y, vx, vy, ax, ay)`, `ay` fastest.
#[derive(Clone, Debug)]
pub struct OracleGrid {
    cfg: EnvConfig,
    axes: [Vec<f64>; 6],
    rows: usize,
}

impl OracleGrid {
    pub fn new(cfg: &EnvConfig, spec: &OracleGridSpec) -> Result<Self> {
        if spec.counts.iter().any(|c| *c == 0) {
            return Err(Error::contract(format!("oracle grid counts must be positive: {:?}", spec.counts)));
        }
        let [vlo, vhi] = spec.velocity_range;
        let [alo, ahi] = cfg.action_bounds;
        let c = spec.counts;
        Ok(Self {
            cfg: cfg.clone(),
            axes: [
                levels(c[0], 0.0, 1.0),
                levels(c[1], 0.0, 1.0),
                levels(c[2], vlo, vhi),
                levels(c[3], vlo, vhi),
                levels(c[4], alo, ahi),
                levels(c[5], alo, ahi),
            ],
            rows: spec.rows(),
        })
    }

    pub fn len(&self) -> usize {
        self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    /// The row at flat `index`, computed directly; shards may call this on
    /// disjoint ranges and concatenate.
    pub fn row(&self, index: usize) -> OracleRow {
        let mut rem = index;
        let mut pick = [0.0; 6];
        for d in (0..6).rev() {
            let n = self.axes[d].len();
            pick[d] = self.axes[d][rem % n];
            rem /= n;
        }
        let s = State { x: pick[0], y: pick[1], vx: pick[2], vy: pick[3] };
        let a = [pick[4], pick[5]];
        OracleRow { s, a, s_next: step_accel(s, a, &self.cfg) }
    }

    pub fn iter(&self) -> impl Iterator<Item = OracleRow> + '_ {
        self.range(0..self.rows)
    }

    pub fn range(&self, r: std::ops::Range<usize>) -> impl Iterator<Item = OracleRow> + '_ {
        r.map(|i| self.row(i))
    }
}

/// Writes `u64` row count then the rows as little-endian `f64`.
pub fn write_dataset<W: Write>(mut w: W, rows: &[OracleRow]) -> Result<()> {
    w.write_all(&(rows.len() as u64).to_le_bytes())?;
    for r in rows {
        for v in r.to_array() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Vec<OracleRow>> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    let n = u64::from_le_bytes(b) as usize;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    let mut row = [0.0; DATASET_ROW_LEN];
    for _ in 0..n {
        for v in row.iter_mut() {
            r.read_exact(&mut b).map_err(|_| Error::Format("dataset shorter than its header".into()))?;
            *v = f64::from_le_bytes(b);
        }
        out.push(OracleRow::from_array(&row));
    }
    Ok(out)
}
