//! JSON document shapes for contracts and Luce specs.
//!
//! Agent ids are 1-based in every document. In `subset_bits`, bit `k`
//! (value `1 << k`) stands for agent `k + 1`.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::subset::check_agent_count;
use crate::model::{all_subsets, Contract, LuceSpec, Subset};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractRowDoc {
    pub subset_bits: u32,
    pub shares: Vec<f64>,
}

/// `{n, budget, unconstrained, table: [{subset_bits, shares}]}`.
///
/// On input, outcomes missing from `table` pay nothing. On output every
/// outcome is listed in increasing `subset_bits` order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractDoc {
    pub n: usize,
    #[serde(default = "unit_budget")]
    pub budget: f64,
    #[serde(default)]
    pub unconstrained: bool,
    pub table: Vec<ContractRowDoc>,
}

fn unit_budget() -> f64 {
    1.0
}

impl TryFrom<ContractDoc> for Contract {
    type Error = Error;

    fn try_from(doc: ContractDoc) -> Result<Self, Error> {
        check_agent_count(doc.n)?;
        let n = doc.n;
        let mut shares = vec![0.0; n << n];
        let mut seen = vec![false; 1 << n];
        for row in doc.table {
            let s = Subset::from_bits(row.subset_bits, n)?;
            if std::mem::replace(&mut seen[s.bits() as usize], true) {
                return Err(Error::invalid(format!(
                    "outcome {} listed twice",
                    row.subset_bits
                )));
            }
            if row.shares.len() != n {
                return Err(Error::invalid(format!(
                    "outcome {} has {} shares, expected {n}",
                    row.subset_bits,
                    row.shares.len()
                )));
            }
            let start = s.bits() as usize * n;
            shares[start..start + n].copy_from_slice(&row.shares);
        }
        Contract::new(n, doc.budget, shares, doc.unconstrained)
    }
}

impl From<Contract> for ContractDoc {
    fn from(c: Contract) -> Self {
        ContractDoc {
            n: c.n(),
            budget: c.budget(),
            unconstrained: c.is_unconstrained(),
            table: all_subsets(c.n())
                .map(|s| ContractRowDoc {
                    subset_bits: s.bits(),
                    shares: c.row(s).to_vec(),
                })
                .collect(),
        }
    }
}

/// `{partition: [[ids]], weights: []}` with `weights[k]` for agent `k + 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LuceSpecDoc {
    pub partition: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl TryFrom<LuceSpecDoc> for LuceSpec {
    type Error = Error;

    fn try_from(doc: LuceSpecDoc) -> Result<Self, Error> {
        let tiers = doc
            .partition
            .into_iter()
            .map(|tier| {
                tier.into_iter()
                    .map(|id| {
                        id.checked_sub(1)
                            .ok_or_else(|| Error::invalid("agent ids are 1-based"))
                    })
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        LuceSpec::new(tiers, doc.weights)
    }
}

impl From<LuceSpec> for LuceSpecDoc {
    fn from(spec: LuceSpec) -> Self {
        LuceSpecDoc {
            partition: one_based_partition(spec.tiers()),
            weights: spec.weights().to_vec(),
        }
    }
}

pub fn one_based_partition(tiers: &[Vec<usize>]) -> Vec<Vec<usize>> {
    tiers
        .iter()
        .map(|t| t.iter().map(|i| i + 1).collect())
        .collect()
}

/// Significant digits of every float in JSON and CSV output.
pub const OUTPUT_DIGITS: usize = 12;

/// `x` rounded to [`OUTPUT_DIGITS`] significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", OUTPUT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest decimal form of `round_sig(x)`.
pub fn format_sig(x: f64) -> String {
    round_sig(x).to_string()
}

/// 1-based member list of a subset, for reports.
pub fn one_based(s: Subset) -> Vec<usize> {
    s.agents().map(|i| i + 1).collect()
}
