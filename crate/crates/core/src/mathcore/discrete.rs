use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

/// Discrete forward model, policy and reference marginal, indexed by the
/// conditioning state.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteJoint {
    /// `P(s'|a,s)` as `[state][action][next]`.
    pub p_next: Vec<Vec<Vec<f64>>>,
    /// `π(a|s)` as `[state][action]`.
    pub policy: Vec<Vec<f64>>,
    /// `Q(s'|s)` as `[state][next]`.
    pub reference: Vec<Vec<f64>>,
}

/// The three sides of `I_Q(S':A|s) = I(S':A|s) + KL[P(s'|s) || Q(s'|s)]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeteroTerms {
    /// Mutual information measured against the reference `Q`.
    pub lhs: f64,
    /// Mutual information against the true action-marginal.
    pub mi_term: f64,
    /// Divergence of the true marginal from `Q`.
    pub kl_term: f64,
    /// Set when `Q` assigns zero mass where the marginal does not; `lhs`
    /// and `kl_term` are then `+inf`.
    pub infinite: bool,
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::contract(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::contract(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl DiscreteJoint {
    pub fn validate(&self) -> Result<()> {
        let states = self.p_next.len();
        if states == 0 || self.policy.len() != states || self.reference.len() != states {
            return Err(Error::contract("tables disagree on the number of states"));
        }
        let next = self.reference[0].len();
        for s in 0..states {
            if self.policy[s].len() != self.p_next[s].len() || self.reference[s].len() != next {
                return Err(Error::contract(format!("shape mismatch at state {s}")));
            }
            check_distribution(&self.policy[s], &format!("policy row {s}"))?;
            check_distribution(&self.reference[s], &format!("reference row {s}"))?;
            for (a, row) in self.p_next[s].iter().enumerate() {
                if row.len() != next {
                    return Err(Error::contract(format!("shape mismatch at ({s}, {a})")));
                }
                check_distribution(row, &format!("transition row ({s}, {a})"))?;
            }
        }
        Ok(())
    }
}

fn xlogy_ratio(p: f64, q: f64) -> (f64, bool) {
    if p == 0.0 {
        (0.0, false)
    } else if q == 0.0 {
        (f64::INFINITY, true)
    } else {
        (p * (p / q).ln(), false)
    }
}

/// Exhaustive evaluation of the heterostatic decomposition for every
/// conditioning state.
pub fn discrete_hetero_decomposition(j: &DiscreteJoint) -> Result<Vec<HeteroTerms>> {
    j.validate()?;
    let out = (0..j.p_next.len())
        .map(|s| {
            let pi = &j.policy[s];
            let q = &j.reference[s];
            let rows = &j.p_next[s];
            let marginal: Vec<f64> = (0..q.len())
                .map(|n| rows.iter().zip(pi).map(|(row, pa)| row[n] * pa).sum())
                .collect();
            let mut infinite = false;
            let (mut lhs, mut mi) = (0.0, 0.0);
            for (row, pa) in rows.iter().zip(pi) {
                if *pa == 0.0 {
                    continue;
                }
                for n in 0..q.len() {
                    let (l, inf) = xlogy_ratio(row[n], q[n]);
                    infinite |= inf;
                    lhs += pa * l;
                    mi += pa * xlogy_ratio(row[n], marginal[n]).0;
                }
            }
            let mut kl = 0.0;
            for n in 0..q.len() {
                let (k, inf) = xlogy_ratio(marginal[n], q[n]);
                infinite |= inf;
                kl += k;
            }
            HeteroTerms {
                lhs,
                mi_term: mi,
                kl_term: kl,
                infinite,
            }
        })
        .collect();
    Ok(out)
}
