//! Reward tables and the named contract families.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::cost::CostModel;
use crate::model::profile::Profile;
use crate::model::subset::{all_subsets, check_agent_count, outcome_table, Subset};

/// Slack allowed on the per-outcome budget constraint.
const BUDGET_SLACK: f64 = 1e-12;

/// For every outcome `S`, the share `f_i(S)` of the budget paid to each agent.
///
/// Shares are nonnegative and, unless `unconstrained` is set, sum to at
/// most 1 on every outcome. The payment agent `i` receives at `S` is
/// `budget * f_i(S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::ContractDoc", into = "crate::io::ContractDoc")]
pub struct Contract {
    n: usize,
    budget: f64,
    unconstrained: bool,
    // row-major: shares[s * n + i]
    shares: Vec<f64>,
}

impl Contract {
    /// Builds and validates a contract from a flattened `2^n x n` table.
    pub fn new(n: usize, budget: f64, shares: Vec<f64>, unconstrained: bool) -> Result<Self> {
        check_agent_count(n)?;
        if shares.len() != n << n {
            return Err(Error::invalid(format!(
                "contract table has {} entries, expected {}",
                shares.len(),
                n << n
            )));
        }
        let c = Contract {
            n,
            budget,
            unconstrained,
            shares,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn from_fn<F: FnMut(Subset, usize) -> f64>(n: usize, mut f: F) -> Result<Self> {
        check_agent_count(n)?;
        let mut shares = Vec::with_capacity(n << n);
        for s in all_subsets(n) {
            for i in 0..n {
                shares.push(f(s, i));
            }
        }
        Self::new(n, 1.0, shares, false)
    }

    pub fn zero(n: usize) -> Result<Self> {
        Self::from_fn(n, |_, _| 0.0)
    }

    /// Splits the budget equally among the successful agents.
    pub fn equal_split(n: usize) -> Result<Self> {
        Self::from_fn(n, |s, i| {
            if s.contains(i) {
                1.0 / s.len() as f64
            } else {
                0.0
            }
        })
    }

    /// Pays each successful agent `c_i'(q_i)`, independent of the others.
    ///
    /// With `allow_unconstrained`, the result carries the unconstrained flag
    /// whenever the payments can exceed 1; otherwise that case is an error.
    pub fn piece_rate(q: &Profile, costs: &CostModel, allow_unconstrained: bool) -> Result<Self> {
        let n = check_same_n(q, costs)?;
        let rate: Vec<f64> = (0..n).map(|i| costs.derivative(i, q[i])).collect();
        let total: f64 = rate.iter().sum();
        let over = total > 1.0 + BUDGET_SLACK;
        if over && !allow_unconstrained {
            return Err(Error::BudgetExceeded {
                subset_bits: Subset::full(n).bits(),
                total,
            });
        }
        let mut shares = Vec::with_capacity(n << n);
        for s in all_subsets(n) {
            shares.extend((0..n).map(|i| if s.contains(i) { rate[i] } else { 0.0 }));
        }
        Self::new(n, 1.0, shares, over)
    }

    /// Pays `q_i c_i'(q_i) / prod_j q_j` to each agent only when all agents succeed.
    pub fn bonus_pool(q: &Profile, costs: &CostModel) -> Result<Self> {
        let n = check_same_n(q, costs)?;
        if let Some(agent) = q.iter().position(|&v| v <= 0.0) {
            return Err(Error::DegenerateProfile {
                agent,
                value: q[agent],
            });
        }
        let all_succeed: f64 = q.iter().product();
        let pay: Vec<f64> = (0..n)
            .map(|i| q[i] * costs.derivative(i, q[i]) / all_succeed)
            .collect();
        let over = pay.iter().sum::<f64>() > 1.0 + BUDGET_SLACK;
        let full = Subset::full(n);
        let mut shares = vec![0.0; n << n];
        shares[full.bits() as usize * n..].copy_from_slice(&pay);
        Self::new(n, 1.0, shares, over)
    }

    fn validate(&self) -> Result<()> {
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::invalid(format!(
                "budget must be positive, got {}",
                self.budget
            )));
        }
        for s in all_subsets(self.n) {
            let row = self.row(s);
            if let Some(i) = row.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::invalid(format!(
                    "limited liability violated: share of agent {} at outcome {s} is {}",
                    i + 1,
                    row[i]
                )));
            }
            let total: f64 = row.iter().sum();
            if !self.unconstrained && total > 1.0 + BUDGET_SLACK {
                return Err(Error::BudgetExceeded {
                    subset_bits: s.bits(),
                    total,
                });
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn budget(&self) -> f64 {
        self.budget
    }

    #[inline]
    pub fn is_unconstrained(&self) -> bool {
        self.unconstrained
    }

    #[inline]
    pub fn share(&self, i: usize, s: Subset) -> f64 {
        self.shares[s.bits() as usize * self.n + i]
    }

    /// All agents' shares at outcome `s`.
    #[inline]
    pub fn row(&self, s: Subset) -> &[f64] {
        let start = s.bits() as usize * self.n;
        &self.shares[start..start + self.n]
    }

    pub fn table(&self) -> &[f64] {
        &self.shares
    }

    pub fn with_budget(mut self, budget: f64) -> Result<Self> {
        self.budget = budget;
        self.validate()?;
        Ok(self)
    }

    /// `E[f_i(S) | i in S]` under `p` (shares, not scaled by the budget).
    pub fn expected_share_given_success(&self, i: usize, p: &[f64]) -> f64 {
        let probs = outcome_table(p, Some(i));
        all_subsets(self.n)
            .filter(|s| !s.contains(i))
            .map(|s| probs[s.bits() as usize] * self.share(i, s.with(i)))
            .sum()
    }

    /// `E[sum_i f_i(S)]` under `p` (shares, not scaled by the budget).
    pub fn expected_total_share(&self, p: &[f64]) -> f64 {
        let probs = outcome_table(p, None);
        all_subsets(self.n)
            .map(|s| probs[s.bits() as usize] * self.row(s).iter().sum::<f64>())
            .sum()
    }

    /// `max_S sum_i f_i(S)`.
    pub fn max_total_share(&self) -> f64 {
        all_subsets(self.n)
            .map(|s| self.row(s).iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Contract) -> f64 {
        crate::numeric::max_abs_diff(&self.shares, &other.shares)
    }
}

fn check_same_n(q: &Profile, costs: &CostModel) -> Result<usize> {
    if q.len() != costs.n() {
        return Err(Error::invalid(format!(
            "profile has {} agents but cost model has {}",
            q.len(),
            costs.n()
        )));
    }
    Ok(q.len())
}
