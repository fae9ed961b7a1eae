//! Distribution of the total payment `B sum_i f_i(S)` and the
//! mean-preserving-spread comparison between implementing contracts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::format_sig;
use crate::model::{all_subsets, outcome_table, Contract, CostModel, Profile};

/// Payment values closer than this are one atom.
pub const ATOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentDistribution {
    /// Sorted by value.
    pub atoms: Vec<Atom>,
    pub mean: f64,
    pub variance: f64,
}

impl PaymentDistribution {
    /// Merges values within [`ATOM_TOL`] of the previous atom and drops
    /// zero-probability atoms.
    pub fn from_points(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::new();
        for (value, probability) in points {
            if probability <= 0.0 {
                continue;
            }
            match atoms.last_mut() {
                Some(a) if (value - a.value).abs() <= ATOM_TOL => a.probability += probability,
                _ => atoms.push(Atom { value, probability }),
            }
        }
        let mean = atoms.iter().map(|a| a.value * a.probability).sum::<f64>();
        let variance = atoms
            .iter()
            .map(|a| (a.value - mean).powi(2) * a.probability)
            .sum::<f64>();
        PaymentDistribution { atoms, mean, variance }
    }

    pub fn probability_of(&self, value: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| (a.value - value).abs() <= ATOM_TOL)
            .map(|a| a.probability)
            .sum()
    }

    pub fn max_payment(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.value)
    }

    /// `∫_{-∞}^x F(t) dt`.
    pub fn integrated_cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.value <= x)
            .map(|a| a.probability * (x - a.value))
            .sum()
    }

    /// `value,probability` rows with a header.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["value", "probability"]).map_err(csv_error)?;
        for a in &self.atoms {
            w.write_record([format_sig(a.value), format_sig(a.probability)])
                .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("csv export failed: {e}"))
}

/// Exact distribution over all `2^n` outcomes under `Pr_p`.
pub fn payment_distribution(f: &Contract, p: &[f64]) -> PaymentDistribution {
    let probs = outcome_table(p, None);
    PaymentDistribution::from_points(
        all_subsets(f.n())
            .map(|s| {
                let total = f.budget() * f.row(s).iter().sum::<f64>();
                (total, probs[s.bits() as usize])
            })
            .collect(),
    )
}

/// `count` FGN contracts that all implement `q`: the piece-rate contract
/// plus, per agent, noise on the outcomes containing that agent with zero
/// mean conditional on the agent succeeding. `scale` defaults to a quarter
/// of the smallest piece rate; noise is uniform in `[-scale, scale]` before
/// centering, so at the default scale payments stay positive on every
/// success. Larger scales truncate at zero and rescale the agent's
/// payments to restore the conditional mean.
pub fn implementing_fgn_samples(
    q: &Profile,
    costs: &CostModel,
    count: usize,
    scale: Option<f64>,
    seed: u64,
) -> Result<Vec<Contract>> {
    q.require_interior()?;
    let base = Contract::piece_rate(q, costs, true)?;
    let n = q.len();
    let rates: Vec<f64> = (0..n).map(|i| costs.derivative(i, q[i])).collect();
    let scale = scale.unwrap_or_else(|| 0.25 * rates.iter().copied().fold(f64::INFINITY, f64::min));
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::invalid(format!("perturbation scale must be nonnegative, got {scale}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut shares = base.table().to_vec();
        for i in 0..n {
            // weights Pr(S | i ∈ S) over S ∌ i, shifted to S ∪ {i}
            let cond = outcome_table(q, Some(i));
            let rows: Vec<usize> = all_subsets(n)
                .filter(|s| !s.contains(i))
                .map(|s| s.bits() as usize)
                .collect();
            let noise: Vec<f64> = rows.iter().map(|_| rng.random_range(-scale..=scale)).collect();
            let mean: f64 = rows.iter().zip(&noise).map(|(&m, e)| cond[m] * e).sum();
            let mut values: Vec<f64> = noise.iter().map(|e| rates[i] + e - mean).collect();
            if values.iter().any(|&v| v < 0.0) {
                values.iter_mut().for_each(|v| *v = v.max(0.0));
                let kept: f64 = rows.iter().zip(&values).map(|(&m, v)| cond[m] * v).sum();
                values.iter_mut().for_each(|v| *v *= rates[i] / kept);
            }
            for (&m, v) in rows.iter().zip(&values) {
                shares[(m | 1 << i) * n + i] = *v;
            }
        }
        out.push(Contract::new(n, 1.0, shares, true)?);
    }
    Ok(out)
}

/// Outcome of comparing the Luce payment distribution with another one
/// implementing the same profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MpsVerdict {
    pub means_equal: bool,
    pub variance_ordered: bool,
    /// `other` is a mean-preserving spread of `luce`: its integrated CDF is
    /// pointwise at least `luce`'s.
    pub sosd: bool,
    pub max_payment_ordered: bool,
    pub mean_gap: f64,
    /// `var(other) - var(luce)`.
    pub variance_gap: f64,
    /// Smallest `G_other(x) - G_luce(x)` over the merged support.
    pub sosd_gap: f64,
}

impl MpsVerdict {
    pub fn all(&self) -> bool {
        self.means_equal && self.variance_ordered && self.sosd && self.max_payment_ordered
    }
}

pub fn mps_compare(luce: &PaymentDistribution, other: &PaymentDistribution) -> MpsVerdict {
    let mean_gap = (luce.mean - other.mean).abs();
    let variance_gap = other.variance - luce.variance;
    let sosd_gap = luce
        .atoms
        .iter()
        .chain(&other.atoms)
        .map(|a| other.integrated_cdf(a.value) - luce.integrated_cdf(a.value))
        .fold(f64::INFINITY, f64::min);
    MpsVerdict {
        means_equal: mean_gap <= 1e-8,
        variance_ordered: variance_gap >= -1e-10,
        sosd: sosd_gap >= -1e-10,
        max_payment_ordered: luce.max_payment() <= other.max_payment() + ATOM_TOL,
        mean_gap,
        variance_gap,
        sosd_gap,
    }
}
