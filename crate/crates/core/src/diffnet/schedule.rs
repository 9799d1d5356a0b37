use crate::error::{Error, Result};

/// Learning rate with multiplicative reduction on loss plateaus.
#[derive(Clone, Debug, PartialEq)]
pub struct LrSchedule {
    base_rate: f64,
    plateau_window: u64,
    reduction_factor: f64,
    tol: f64,
    best_loss: f64,
    epochs_since_improvement: u64,
    reductions: u32,
}

impl LrSchedule {
    pub fn new(base_rate: f64, plateau_window: u64, reduction_factor: f64, tol: f64) -> Result<Self> {
        if !(base_rate >= 0.0) || plateau_window == 0 || !(reduction_factor > 0.0 && reduction_factor < 1.0) {
            return Err(Error::contract(format!(
                "invalid schedule (rate {base_rate}, window {plateau_window}, factor {reduction_factor})"
            )));
        }
        Ok(Self {
            base_rate,
            plateau_window,
            reduction_factor,
            tol,
            best_loss: f64::INFINITY,
            epochs_since_improvement: 0,
            reductions: 0,
        })
    }

    /// A schedule that never reduces.
    pub fn constant(rate: f64) -> Self {
        Self {
            base_rate: rate,
            plateau_window: u64::MAX,
            reduction_factor: 0.5,
            tol: 0.0,
            best_loss: f64::INFINITY,
            epochs_since_improvement: 0,
            reductions: 0,
        }
    }

    pub fn rate(&self) -> f64 {
        self.base_rate * self.reduction_factor.powi(self.reductions as i32)
    }

    pub fn reductions(&self) -> u32 {
        self.reductions
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    /// Feeds one epoch's loss and returns the (possibly reduced) rate.
    pub fn update(&mut self, epoch_loss: f64) -> Result<f64> {
        if !epoch_loss.is_finite() {
            return Err(Error::numerical(format!("non-finite epoch loss {epoch_loss}")));
        }
        if epoch_loss < self.best_loss - self.tol {
            self.best_loss = epoch_loss;
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
            if self.epochs_since_improvement >= self.plateau_window {
                self.reductions += 1;
                self.epochs_since_improvement = 0;
            }
        }
        Ok(self.rate())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decreasing_loss_never_reduces() {
        let mut s = LrSchedule::new(1e-3, 3, 0.1, 1e-6).unwrap();
        for i in 0..100 {
            assert_eq!(s.update(10.0 - i as f64 * 0.01).unwrap(), 1e-3);
        }
    }

    #[test]
    fn one_window_of_plateau_reduces_once() {
        let mut s = LrSchedule::new(1.0, 5, 0.1, 1e-6).unwrap();
        s.update(1.0).unwrap();
        for _ in 0..5 {
            s.update(1.0).unwrap();
        }
        assert_eq!(s.reductions(), 1);
        assert!((s.rate() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn two_windows_reduce_twice() {
        // Counter simulation: reductions fire at epochs W and 2W after the best.
        let w = 7;
        let mut s = LrSchedule::new(1.0, w, 0.1, 1e-6).unwrap();
        s.update(1.0).unwrap();
        let mut fired = Vec::new();
        for e in 1..=2 * w {
            let before = s.reductions();
            s.update(1.0).unwrap();
            if s.reductions() > before {
                fired.push(e);
            }
        }
        assert_eq!(fired, vec![w, 2 * w]);
        assert!((s.rate() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn improvements_below_tolerance_count_as_plateau() {
        let mut s = LrSchedule::new(1.0, 3, 0.5, 1e-3).unwrap();
        s.update(1.0).unwrap();
        for i in 1..=3 {
            s.update(1.0 - i as f64 * 1e-4).unwrap();
        }
        assert_eq!(s.reductions(), 1);
    }

    #[test]
    fn rejects_non_finite() {
        let mut s = LrSchedule::new(1.0, 3, 0.5, 1e-3).unwrap();
        assert!(s.update(f64::NAN).is_err());
    }
}
