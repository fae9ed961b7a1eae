//! Structural classification of reward tables.

use serde::Serialize;

use crate::model::contract::Contract;
use crate::model::luce_spec::LuceSpec;
use crate::model::subset::{all_subsets, Subset};

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    /// Failures get nothing.
    pub is_fgn: bool,
    /// Successful get everything (FGN and the budget is exhausted on every nonempty outcome).
    pub is_sge: bool,
    /// Luce contract with a single tier.
    pub is_weighted: bool,
    pub is_luce: bool,
    /// Canonical spec recovered from the table when `is_luce`.
    pub luce_spec: Option<LuceSpec>,
}

pub fn classify(f: &Contract, tol: f64) -> Classification {
    let n = f.n();
    let is_fgn = all_subsets(n).all(|s| (0..n).all(|i| s.contains(i) || f.share(i, s) <= tol));
    let is_sge = is_fgn
        && all_subsets(n)
            .skip(1)
            .all(|s| (f.row(s).iter().sum::<f64>() - 1.0).abs() <= tol);
    let luce_spec = if is_sge { recover_luce(f, tol) } else { None };
    Classification {
        is_fgn,
        is_sge,
        is_weighted: luce_spec.as_ref().is_some_and(|s| s.tiers().len() == 1),
        is_luce: luce_spec.is_some(),
        luce_spec,
    }
}

/// Reads tiers and weight ratios off the pairwise outcomes, then confirms
/// the candidate reproduces the whole table.
fn recover_luce(f: &Contract, tol: f64) -> Option<LuceSpec> {
    let n = f.n();
    // above[i] = number of agents with strict priority over i
    let mut above = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let pair = Subset::from_agents([i, j]);
            let (a, b) = (f.share(i, pair), f.share(j, pair));
            if b <= tol && a > tol {
                above[j] += 1;
            } else if a <= tol && b > tol {
                above[i] += 1;
            }
        }
    }
    let mut ranks: Vec<usize> = above.clone();
    ranks.sort_unstable();
    ranks.dedup();
    let tiers: Vec<Vec<usize>> = ranks
        .iter()
        .map(|&r| (0..n).filter(|&i| above[i] == r).collect())
        .collect();
    let mut weights = vec![1.0; n];
    for tier in &tiers {
        let head = tier[0];
        for &i in &tier[1..] {
            let pair = Subset::from_agents([head, i]);
            let (wh, wi) = (f.share(head, pair), f.share(i, pair));
            if wh <= tol || wi <= tol {
                return None;
            }
            weights[i] = wi / wh;
        }
    }
    let spec = LuceSpec::new(tiers, weights).ok()?;
    (spec.expand().max_abs_diff(f) <= tol).then_some(spec)
}
