/// Visit statistics over a square grid of position cells.
///
/// Counters start at one so the entropy trace begins at its maximum,
/// `ln(cells)`. The entropy is maintained incrementally as
/// `ln N - (Σ c ln c) / N`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoverageGrid {
    side: usize,
    counts: Vec<u64>,
    visited: Vec<bool>,
    n_visited: usize,
    total: f64,
    sum_c_ln_c: f64,
}

impl Default for CoverageGrid {
    fn default() -> Self {
        Self::new(50)
    }
}

impl CoverageGrid {
    pub fn new(side: usize) -> Self {
        let n = side * side;
        Self {
            side,
            counts: vec![1; n],
            visited: vec![false; n],
            n_visited: 0,
            total: n as f64,
            sum_c_ln_c: 0.0,
        }
    }

    pub fn cells(&self) -> usize {
        self.counts.len()
    }

    /// Cell index of a position in the unit square; boundaries fall into the last cell.
    pub fn cell_of(&self, x: f64, y: f64) -> usize {
        let b = |v: f64| ((v.clamp(0.0, 1.0) * self.side as f64) as usize).min(self.side - 1);
        b(x) * self.side + b(y)
    }

    pub fn visit(&mut self, x: f64, y: f64) {
        let i = self.cell_of(x, y);
        let c = self.counts[i] as f64;
        self.sum_c_ln_c += (c + 1.0) * (c + 1.0).ln() - c * c.ln();
        self.counts[i] += 1;
        self.total += 1.0;
        if !self.visited[i] {
            self.visited[i] = true;
            self.n_visited += 1;
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Fraction of cells visited at least once.
    pub fn coverage_rate(&self) -> f64 {
        self.n_visited as f64 / self.cells() as f64
    }

    /// Shannon entropy of the normalised counters, in nats.
    pub fn coverage_entropy(&self) -> f64 {
        (self.total.ln() - self.sum_c_ln_c / self.total).clamp(0.0, (self.cells() as f64).ln())
    }
}
