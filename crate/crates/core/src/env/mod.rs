//! Deterministic two-dimensional mountain car.
//!
//! Position lives in the unit square, velocity is unbounded. Gaussian-shaped
//! attractors pull the car toward their centres and repellers push it away.
//! Touching a wall clamps the position and zeroes the whole velocity. There is
//! no reward signal and no terminal state.

mod oracle;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::Vec4;

pub use oracle::{
    read_dataset, write_dataset, OracleGrid, OracleGridSpec, OracleRow, DATASET_ROW_LEN,
};

/// `(x, y, vx, vy)`; `x, y` in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl State {
    pub fn at_rest(x: f64, y: f64) -> Self {
        Self { x, y, vx: 0.0, vy: 0.0 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self { x: a[0], y: a[1], vx: a[2], vy: a[3] }
    }

    pub fn to_vector(self) -> Vec4 {
        Vec4::new(self.x, self.y, self.vx, self.vy)
    }

    pub fn from_vector(v: &Vec4) -> Self {
        Self { x: v[0], y: v[1], vx: v[2], vy: v[3] }
    }
}

/// A hill or valley of the force landscape.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub center: [f64; 2],
    pub strength: f64,
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub attractors: Vec<Feature>,
    pub repellers: Vec<Feature>,
    pub dt: f64,
    pub damping: f64,
    /// Acceleration bounds, identical on both axes.
    pub action_bounds: [f64; 2],
    /// Levels per axis of the action grid.
    pub grid_size: usize,
    pub start: [f64; 2],
}

impl Default for EnvConfig {
    fn default() -> Self {
        let repeller = |x, y| Feature { center: [x, y], strength: 2.0, width: 0.10 };
        Self {
            attractors: vec![Feature { center: [0.5, 0.5], strength: 1.5, width: 0.15 }],
            repellers: vec![repeller(0.25, 0.75), repeller(0.75, 0.75), repeller(0.75, 0.25)],
            dt: 0.05,
            damping: 0.01,
            action_bounds: [-2.0, 2.0],
            grid_size: 11,
            start: [0.1, 0.1],
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let inside = |c: [f64; 2]| (0.0..=1.0).contains(&c[0]) && (0.0..=1.0).contains(&c[1]);
        for f in self.attractors.iter().chain(&self.repellers) {
            if !inside(f.center) || !(f.strength > 0.0) || !(f.width > 0.0) {
                return Err(Error::Config(format!("invalid force feature {f:?}")));
            }
        }
        if !inside(self.start) {
            return Err(Error::Config("start position outside the unit square".into()));
        }
        if !(self.dt > 0.0) || !(self.damping >= 0.0) || self.grid_size < 2 {
            return Err(Error::Config("dt must be positive, damping non-negative, grid_size >= 2".into()));
        }
        if !(self.action_bounds[0] < self.action_bounds[1]) {
            return Err(Error::Config("action bounds must be increasing".into()));
        }
        Ok(())
    }

    pub fn start_state(&self) -> State {
        State::at_rest(self.start[0], self.start[1])
    }

    pub fn action_grid(&self) -> ActionGrid {
        ActionGrid::new(self.grid_size, self.action_bounds[0], self.action_bounds[1])
    }
}

/// Evenly spaced accelerations on both axes; index `row * n + col` maps to
/// `(levels[row], levels[col])`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionGrid {
    levels: Vec<f64>,
}

impl ActionGrid {
    pub fn new(n: usize, low: f64, high: f64) -> Self {
        Self { levels: even_levels(n, low, high) }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len() * self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn accel(&self, index: usize) -> Result<[f64; 2]> {
        let n = self.levels.len();
        if index >= n * n {
            return Err(Error::contract(format!("action index {index} outside 0..{}", n * n)));
        }
        Ok([self.levels[index / n], self.levels[index % n]])
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.levels.len() + col
    }

    /// All accelerations in index order.
    pub fn all(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.accel(i).expect("in range")).collect()
    }
}

/// Evenly spaced levels over `[lo, hi]` including both ends; a single level
/// sits at the midpoint.
pub(crate) fn even_levels(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

fn feature_force(pos: [f64; 2], f: &Feature, sign: f64) -> [f64; 2] {
    let dx = f.center[0] - pos[0];
    let dy = f.center[1] - pos[1];
    let w2 = f.width * f.width;
    let g = sign * f.strength / w2 * (-(dx * dx + dy * dy) / (2.0 * w2)).exp();
    [g * dx, g * dy]
}

/// Landscape acceleration at `pos`: attractors pull toward their centre,
/// repellers push away, both with Gaussian falloff.
pub fn external_accel(pos: [f64; 2], cfg: &EnvConfig) -> [f64; 2] {
    let mut acc = [0.0, 0.0];
    let features = cfg
        .attractors
        .iter()
        .map(|f| (f, 1.0))
        .chain(cfg.repellers.iter().map(|f| (f, -1.0)));
    for (f, sign) in features {
        let [fx, fy] = feature_force(pos, f, sign);
        acc[0] += fx;
        acc[1] += fy;
    }
    acc
}

/// Semi-implicit Euler step with an arbitrary acceleration command.
pub fn step_accel(s: State, a: [f64; 2], cfg: &EnvConfig) -> State {
    let f = external_accel([s.x, s.y], cfg);
    let keep = 1.0 - cfg.damping;
    let vx = keep * s.vx + (a[0] + f[0]) * cfg.dt;
    let vy = keep * s.vy + (a[1] + f[1]) * cfg.dt;
    let x = s.x + vx * cfg.dt;
    let y = s.y + vy * cfg.dt;
    if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
        State { x, y, vx, vy }
    } else {
        State::at_rest(x.clamp(0.0, 1.0), y.clamp(0.0, 1.0))
    }
}

/// One environment step with a grid action.
pub fn step(s: State, action_index: usize, cfg: &EnvConfig) -> Result<State> {
    let a = cfg.action_grid().accel(action_index)?;
    Ok(step_accel(s, a, cfg))
}
