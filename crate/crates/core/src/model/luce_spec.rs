//! Priority tiers plus weights, and their expansion into full reward tables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::contract::Contract;
use crate::model::subset::{all_subsets, check_agent_count, Subset};

/// An ordered partition of the agents into priority tiers (earlier tiers
/// win) together with a positive weight per agent.
///
/// Stored canonically: members of each tier in increasing order and
/// weights normalized so that every tier's weights sum to 1. Two specs
/// describe the same contract iff their canonical forms are equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "crate::io::LuceSpecDoc", into = "crate::io::LuceSpecDoc")]
pub struct LuceSpec {
    tiers: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

impl LuceSpec {
    /// `tiers` use 0-based agent ids; `weights[i]` is agent `i`'s weight.
    pub fn new(tiers: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        check_agent_count(n)?;
        let mut seen = vec![false; n];
        for tier in &tiers {
            if tier.is_empty() {
                return Err(Error::invalid("priority tiers must be nonempty"));
            }
            for &i in tier {
                if i >= n {
                    return Err(Error::invalid(format!(
                        "agent {} outside 1..={n}",
                        i + 1
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::invalid(format!(
                        "agent {} appears in more than one tier",
                        i + 1
                    )));
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!("agent {} is in no tier", i + 1)));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(format!(
                "weight of agent {} must be positive, got {}",
                i + 1,
                weights[i]
            )));
        }
        let mut spec = LuceSpec { tiers, weights };
        spec.canonicalize();
        Ok(spec)
    }

    /// A single tier: the weighted contract.
    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        let n = weights.len();
        Self::new(vec![(0..n).collect()], weights)
    }

    /// Strict priority in the given order; weights are irrelevant.
    pub fn priority(order: &[usize]) -> Result<Self> {
        Self::new(
            order.iter().map(|&i| vec![i]).collect(),
            vec![1.0; order.len()],
        )
    }

    pub fn equal_split(n: usize) -> Result<Self> {
        Self::weighted(vec![1.0; n])
    }

    fn canonicalize(&mut self) {
        for tier in &mut self.tiers {
            tier.sort_unstable();
            let total: f64 = tier.iter().map(|&i| self.weights[i]).sum();
            for &i in tier.iter() {
                self.weights[i] /= total;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn tiers(&self) -> &[Vec<usize>] {
        &self.tiers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tier_masks(&self) -> Vec<Subset> {
        self.tiers
            .iter()
            .map(|t| Subset::from_agents(t.iter().copied()))
            .collect()
    }

    /// Tier index of every agent.
    pub fn tier_of(&self) -> Vec<usize> {
        let mut out = vec![0; self.n()];
        for (k, tier) in self.tiers.iter().enumerate() {
            for &i in tier {
                out[i] = k;
            }
        }
        out
    }

    /// `Top(S)`: the successful agents of the highest-priority tier that has any.
    pub fn top(&self, s: Subset, masks: &[Subset]) -> Subset {
        masks
            .iter()
            .map(|m| s.intersection(*m))
            .find(|t| !t.is_empty())
            .unwrap_or(Subset::EMPTY)
    }

    /// The full reward table with unit budget.
    pub fn expand(&self) -> Contract {
        let n = self.n();
        let masks = self.tier_masks();
        let mut shares = vec![0.0; n << n];
        for s in all_subsets(n).skip(1) {
            let top = self.top(s, &masks);
            let total: f64 = top.agents().map(|i| self.weights[i]).sum();
            let row = &mut shares[s.bits() as usize * n..(s.bits() as usize + 1) * n];
            for i in top.agents() {
                row[i] = self.weights[i] / total;
            }
        }
        Contract::new(n, 1.0, shares, false).expect("Luce expansion is a valid contract")
    }

    pub fn expand_with_budget(&self, budget: f64) -> Result<Contract> {
        self.expand().with_budget(budget)
    }

    /// Same tiers, and weights within `tol`.
    pub fn approx_eq(&self, other: &LuceSpec, tol: f64) -> bool {
        self.tiers == other.tiers && self.max_weight_diff(other) <= tol
    }

    pub fn max_weight_diff(&self, other: &LuceSpec) -> f64 {
        crate::numeric::max_abs_diff(&self.weights, &other.weights)
    }
}
