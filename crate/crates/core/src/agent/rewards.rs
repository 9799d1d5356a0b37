use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};

/// Intrinsic reward samples recorded during a run, keyed by step stamp.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RewardDatabase {
    by_step: BTreeMap<u64, Vec<f64>>,
}

impl RewardDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, step: u64, value: f64) {
        self.by_step.entry(step).or_default().push(value);
    }

    pub fn len(&self) -> usize {
        self.by_step.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_step.is_empty()
    }

    pub fn samples_at(&self, step: u64) -> Option<&[f64]> {
        self.by_step.get(&step).map(Vec::as_slice)
    }

    /// Stamp with samples closest to `step`; ties go to the earlier stamp.
    pub fn nearest_stamp(&self, step: u64) -> Option<u64> {
        let below = self.by_step.range(..=step).next_back().map(|(k, _)| *k);
        let above = self.by_step.range(step..).next().map(|(k, _)| *k);
        match (below, above) {
            (Some(b), Some(a)) => Some(if step - b <= a - step { b } else { a }),
            (b, a) => b.or(a),
        }
    }

    /// Draws `n` values uniformly from the samples at the stamp nearest `step`;
    /// also returns the stamp used.
    pub fn draw<R: Rng>(&self, step: u64, n: usize, rng: &mut R) -> Result<(Vec<f64>, u64)> {
        let stamp = self
            .nearest_stamp(step)
            .ok_or_else(|| Error::Dependency("reward database is empty".into()))?;
        let pool = &self.by_step[&stamp];
        Ok(((0..n).map(|_| pool[rng.gen_range(0..pool.len())]).collect(), stamp))
    }

    /// `u64` record count followed by `(step, value)` little-endian `f64` pairs.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        for (step, values) in &self.by_step {
            for v in values {
                w.write_all(&(*step as f64).to_le_bytes())?;
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        let n = u64::from_le_bytes(b);
        let mut db = Self::new();
        for _ in 0..n {
            let mut pair = [0.0; 2];
            for v in pair.iter_mut() {
                r.read_exact(&mut b).map_err(|_| Error::Format("reward database shorter than its header".into()))?;
                *v = f64::from_le_bytes(b);
            }
            if pair[0] < 0.0 || pair[0].fract() != 0.0 {
                return Err(Error::Format(format!("invalid step stamp {}", pair[0])));
            }
            db.record(pair[0] as u64, pair[1]);
        }
        Ok(db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_stamp_and_fallback() {
        let mut db = RewardDatabase::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(db.draw(0, 1, &mut rng).is_err());
        db.record(10, 1.0);
        db.record(10, 2.0);
        db.record(20, 5.0);
        let (v, stamp) = db.draw(10, 50, &mut rng).unwrap();
        assert_eq!(stamp, 10);
        assert!(v.iter().all(|x| *x == 1.0 || *x == 2.0));
        assert_eq!(db.nearest_stamp(14), Some(10));
        assert_eq!(db.nearest_stamp(15), Some(10));
        assert_eq!(db.nearest_stamp(16), Some(20));
        assert_eq!(db.nearest_stamp(99), Some(20));
        assert_eq!(db.draw(0, 1, &mut rng).unwrap().1, 10);
    }

    #[test]
    fn file_round_trip() {
        let mut db = RewardDatabase::new();
        for t in 0..5 {
            db.record(t, t as f64 * 0.5 - 1.0);
            db.record(t, 1e-7);
        }
        let mut buf = Vec::new();
        db.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 10 * 16);
        assert_eq!(RewardDatabase::read_from(buf.as_slice()).unwrap(), db);
        assert!(RewardDatabase::read_from(&buf[..20]).is_err());
    }
}
