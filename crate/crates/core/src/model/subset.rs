//! Outcomes as bitmasks over agents, and exact outcome-probability arithmetic.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Hard cap on the number of agents; every table has `2^n` rows.
pub const MAX_AGENTS: usize = 20;

/// A set of agents encoded as a bitmask (bit `i` set iff agent `i` is a member).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Subset(pub u32);

impl Subset {
    pub const EMPTY: Subset = Subset(0);

    pub fn from_bits(bits: u32, n: usize) -> Result<Self> {
        check_agent_count(n)?;
        if n < 32 && bits >> n != 0 {
            return Err(Error::invalid(format!(
                "subset bits {bits:#b} reference agents outside 0..{n}"
            )));
        }
        Ok(Subset(bits))
    }

    pub fn full(n: usize) -> Self {
        Subset(full_mask(n))
    }

    pub fn singleton(i: usize) -> Self {
        Subset(1 << i)
    }

    pub fn from_agents<I: IntoIterator<Item = usize>>(agents: I) -> Self {
        Subset(agents.into_iter().fold(0, |m, i| m | (1 << i)))
    }

    #[inline]
    pub fn bits(self) -> u32 {
        self.0
    }

    #[inline]
    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn with(self, i: usize) -> Self {
        Subset(self.0 | (1 << i))
    }

    #[inline]
    pub fn without(self, i: usize) -> Self {
        Subset(self.0 & !(1 << i))
    }

    #[inline]
    pub fn is_subset_of(self, other: Subset) -> bool {
        self.0 & !other.0 == 0
    }

    #[inline]
    pub fn union(self, other: Subset) -> Self {
        Subset(self.0 | other.0)
    }

    #[inline]
    pub fn intersection(self, other: Subset) -> Self {
        Subset(self.0 & other.0)
    }

    /// Members in increasing order.
    pub fn agents(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Display for Subset {
    /// 1-based, e.g. `{1,3}`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.agents().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Subset {
    /// As the list of 1-based member ids.
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_seq(self.agents().map(|i| i + 1))
    }
}

impl<'de> Deserialize<'de> for Subset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let ids = Vec::<usize>::deserialize(d)?;
        ids.into_iter()
            .try_fold(Subset::EMPTY, |s, id| match id {
                1..=MAX_AGENTS => Ok(s.with(id - 1)),
                _ => Err(serde::de::Error::custom(format!("agent id {id} out of range"))),
            })
    }
}

#[inline]
pub(crate) fn full_mask(n: usize) -> u32 {
    if n == 0 {
        0
    } else {
        u32::MAX >> (32 - n)
    }
}

pub(crate) fn check_agent_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("at least one agent is required"));
    }
    if n > MAX_AGENTS {
        return Err(Error::TooManyAgents { n, max: MAX_AGENTS });
    }
    Ok(())
}

/// All `2^n` subsets in increasing bit order.
pub fn all_subsets(n: usize) -> impl Iterator<Item = Subset> {
    (0..=full_mask(n)).map(Subset)
}

/// `Pr_p(S) = prod_{i in S} p_i * prod_{j not in S} (1 - p_j)`.
pub fn outcome_prob(p: &[f64], s: Subset) -> f64 {
    p.iter()
        .enumerate()
        .map(|(i, &pi)| if s.contains(i) { pi } else { 1.0 - pi })
        .product()
}

/// Probability of every outcome, indexed by bitmask.
///
/// When `exclude` is `Some(k)`, agent `k` is marginalized out: entries with
/// bit `k` set are zero and the rest give `Pr_{p_{-k}}` over `[n] \ {k}`.
pub fn outcome_table(p: &[f64], exclude: Option<usize>) -> Vec<f64> {
    let n = p.len();
    let mut probs = vec![0.0; 1usize << n];
    probs[0] = 1.0;
    let mut filled = 1usize;
    for (j, &pj) in p.iter().enumerate() {
        if Some(j) == exclude {
            filled <<= 1;
            continue;
        }
        let bit = 1usize << j;
        for m in 0..filled {
            let base = probs[m];
            probs[m | bit] = base * pj;
            probs[m] = base * (1.0 - pj);
        }
        filled <<= 1;
    }
    probs
}

/// `P[S ∩ I ≠ ∅] = 1 - prod_{i in I} (1 - p_i)`.
pub fn prob_hits(p: &[f64], set: Subset) -> f64 {
    1.0 - set.agents().map(|i| 1.0 - p[i]).product::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outcome_prob_examples() {
        let p = [0.4, 0.4];
        assert!((outcome_prob(&p, Subset::singleton(0)) - 0.24).abs() < 1e-15);
        assert!((outcome_prob(&p, Subset::EMPTY) - 0.36).abs() < 1e-15);
    }

    #[test]
    fn sixteen_outcomes_normalize() {
        let p = [0.1, 0.7, 0.33, 0.95];
        let total: f64 = all_subsets(4).map(|s| outcome_prob(&p, s)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn table_matches_direct_product() {
        let p = [0.2, 0.5, 0.9];
        let t = outcome_table(&p, None);
        for s in all_subsets(3) {
            assert!((t[s.bits() as usize] - outcome_prob(&p, s)).abs() < 1e-15);
        }
        let t1 = outcome_table(&p, Some(1));
        for s in all_subsets(3) {
            let expect = if s.contains(1) {
                0.0
            } else {
                outcome_prob(&[0.2, 0.9], Subset::from_agents(s.agents().map(|i| if i == 2 { 1 } else { i })))
            };
            assert!((t1[s.bits() as usize] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn bits_outside_range_rejected() {
        assert!(Subset::from_bits(0b100, 2).is_err());
        assert!(Subset::from_bits(0b11, 2).is_ok());
        assert!(matches!(
            Subset::from_bits(0, 21),
            Err(Error::TooManyAgents { .. })
        ));
    }

    #[test]
    fn display_is_one_based() {
        assert_eq!(Subset::from_agents([0, 2]).to_string(), "{1,3}");
        assert_eq!(Subset::EMPTY.to_string(), "{}");
    }

    #[test]
    fn hits_probability() {
        let p = [0.5, 0.25];
        assert!((prob_hits(&p, Subset::full(2)) - 0.625).abs() < 1e-15);
        assert_eq!(prob_hits(&p, Subset::EMPTY), 0.0);
    }
}
