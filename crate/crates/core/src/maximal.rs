//! Implementability and maximality tests on effort profiles, plus a
//! brute-force dominance oracle over SGE contracts.
//!
//! For any implementable profile, `z(p) = sum_i p_i c_i'(p_i) + prod_i (1 - p_i)`
//! is at most 1, with equality exactly at equilibria of contracts that
//! spend the whole budget whenever someone succeeds. A profile in `(0,1)^n`
//! is reachable by a Luce contract with some budget iff, for every
//! nonempty `I`,
//!
//! ```text
//! sum_{i in I} p_i c_i'(p_i) / sum_i p_i c_i'(p_i)  <=  P[S ∩ I ≠ ∅] / P[S ≠ ∅].
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{find_equilibria, SolverOptions};
use crate::error::{Error, Result};
use crate::io::format_sig;
use crate::model::subset::full_mask;
use crate::model::{Contract, CostModel, Profile, Subset};
use crate::payments::csv_error;
use crate::sampling::random_sub_budget_fgn;

/// Two ratios closer than this count as equal when collecting tight sets.
pub const TIGHT_TOL: f64 = 1e-9;

pub fn z_value(p: &[f64], costs: &CostModel) -> f64 {
    costs.weighted_marginal_cost(p) + p.iter().map(|pi| 1.0 - pi).product::<f64>()
}

/// Necessary (not sufficient) condition for `p` to be an equilibrium of
/// some contract: `z(p) <= 1 + tol`.
pub fn implementability_necessary(p: &[f64], costs: &CostModel, tol: f64) -> bool {
    z_value(p, costs) <= 1.0 + tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub holds: bool,
    /// Subset maximizing `lhs - rhs`.
    pub worst_subset: Subset,
    pub lhs: f64,
    pub rhs: f64,
    /// Subsets where the inequality is an equality within tolerance; always
    /// contains the grand set. Ordered by size, then bits.
    pub tight_sets: Vec<Subset>,
}

pub fn luce_condition(p: &Profile, costs: &CostModel) -> Result<ConditionReport> {
    luce_condition_with_tol(p, costs, TIGHT_TOL)
}

pub fn luce_condition_with_tol(p: &Profile, costs: &CostModel, tol: f64) -> Result<ConditionReport> {
    if p.len() != costs.n() {
        return Err(Error::invalid("profile and cost model sizes differ"));
    }
    p.require_interior()?;
    let n = p.len();
    let full = full_mask(n) as usize;
    // subset sums of p_i c_i'(p_i) and subset products of (1 - p_i)
    let mut mass = vec![0.0; full + 1];
    let mut miss = vec![1.0; full + 1];
    for m in 1..=full {
        let i = m.trailing_zeros() as usize;
        let rest = m & (m - 1);
        mass[m] = mass[rest] + p[i] * costs.derivative(i, p[i]);
        miss[m] = miss[rest] * (1.0 - p[i]);
    }
    let total_mass = mass[full];
    let any_success = 1.0 - miss[full];
    let mut worst = (f64::NEG_INFINITY, full, 1.0, 1.0);
    let mut tight = Vec::new();
    for m in 1..=full {
        let (lhs, rhs) = if m == full {
            (1.0, 1.0)
        } else {
            (mass[m] / total_mass, (1.0 - miss[m]) / any_success)
        };
        let gap = lhs - rhs;
        if gap > worst.0 {
            worst = (gap, m, lhs, rhs);
        }
        if gap.abs() <= tol {
            tight.push(Subset(m as u32));
        }
    }
    tight.sort_by_key(|s| (s.len(), s.bits()));
    Ok(ConditionReport {
        holds: worst.0 <= tol,
        worst_subset: Subset(worst.1 as u32),
        lhs: worst.2,
        rhs: worst.3,
        tight_sets: tight,
    })
}

/// `|z(p) - 1| <= tol` and the Luce condition holds: the characterization of
/// maximal equilibria, restricted to interior profiles.
pub fn maximal_candidate(p: &Profile, costs: &CostModel, tol: f64) -> Result<bool> {
    let report = luce_condition(p, costs)?;
    Ok((z_value(p, costs) - 1.0).abs() <= tol && report.holds)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    /// Free share parameters of the SGE contract (empty for one agent).
    pub params: Vec<f64>,
    pub profile: Profile,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceCheck {
    pub profile: Profile,
    pub z: f64,
    /// Smallest slack `s` such that some frontier point is `>= profile - s` coordinate-wise.
    pub needed_slack: f64,
    pub dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierReport {
    pub grid_step: f64,
    pub slack: f64,
    pub points: Vec<FrontierPoint>,
    pub checks: Vec<DominanceCheck>,
    pub warnings: Vec<String>,
}

impl FrontierReport {
    pub fn all_dominated(&self) -> bool {
        self.checks.iter().all(|c| c.dominated)
    }

    /// One row per frontier point: parameters, profile, then `z`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if let Some(first) = self.points.first() {
            let mut header: Vec<String> = (1..=first.params.len()).map(|k| format!("param{k}")).collect();
            header.extend((1..=first.profile.len()).map(|i| format!("p{i}")));
            header.push("z".into());
            w.write_record(&header).map_err(csv_error)?;
        }
        for pt in &self.points {
            let row = pt.params.iter().chain(pt.profile.iter()).chain([&pt.z]);
            w.write_record(row.map(|&v| format_sig(v))).map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// Every SGE contract on the parameter grid for `n <= 3`, as
/// `(params, contract)`.
///
/// For two agents the single parameter is agent 1's share when both
/// succeed. For three agents: agent 1's share at `{1,2}` and `{1,3}`,
/// agent 2's share at `{2,3}`, then agents 1 and 2 at `{1,2,3}`.
pub fn sge_grid(n: usize, resolution: usize) -> Result<Vec<(Vec<f64>, Contract)>> {
    if resolution == 0 {
        return Err(Error::invalid("grid resolution must be positive"));
    }
    let step = 1.0 / resolution as f64;
    let levels: Vec<f64> = (0..=resolution).map(|k| k as f64 * step).collect();
    let pair = |s: Subset, first: usize, x: f64, i: usize| -> Option<f64> {
        (s.len() == 2).then_some(if i == first { x } else { 1.0 - x })
    };
    match n {
        1 => Ok(vec![(vec![], Contract::new(1, 1.0, vec![0.0, 1.0], false)?)]),
        2 => levels
            .iter()
            .map(|&x| {
                let f = Contract::from_fn(2, |s, i| {
                    if !s.contains(i) {
                        0.0
                    } else {
                        pair(s, 0, x, i).unwrap_or(1.0)
                    }
                })?;
                Ok((vec![x], f))
            })
            .collect(),
        3 => {
            let mut out = Vec::new();
            for &a in &levels {
                for &b in &levels {
                    for &c in &levels {
                        for (ki, &t1) in levels.iter().enumerate() {
                            for &t2 in &levels[..=resolution - ki] {
                                let t3 = (1.0 - t1 - t2).max(0.0);
                                let f = Contract::from_fn(3, |s, i| {
                                    if !s.contains(i) {
                                        return 0.0;
                                    }
                                    match s.bits() {
                                        0b011 => pair(s, 0, a, i).unwrap(),
                                        0b101 => pair(s, 0, b, i).unwrap(),
                                        0b110 => pair(s, 1, c, i).unwrap(),
                                        0b111 => [t1, t2, t3][i],
                                        _ => 1.0,
                                    }
                                })?;
                                out.push((vec![a, b, c, t1, t2], f));
                            }
                        }
                    }
                }
            }
            Ok(out)
        }
        _ => Err(Error::invalid(format!(
            "brute-force frontier supports at most 3 agents, got {n}"
        ))),
    }
}

/// Sampled maximal frontier plus dominance evidence.
///
/// Solves every SGE contract of [`sge_grid`], then draws `non_sge_samples`
/// random FGN contracts with budget left unspent on every outcome and
/// checks that each of their equilibria is dominated by a frontier point
/// up to two grid steps. Needing more slack is reported as a
/// `GridTooCoarse` warning.
pub fn brute_force_frontier(
    costs: &CostModel,
    grid_resolution: usize,
    non_sge_samples: usize,
    opts: &SolverOptions,
) -> Result<FrontierReport> {
    let n = costs.n();
    let grid = sge_grid(n, grid_resolution)?;
    let step = 1.0 / grid_resolution as f64;
    let slack = 2.0 * step;
    let solved: Vec<Vec<FrontierPoint>> = grid
        .par_iter()
        .map(|(params, f)| {
            Ok(find_equilibria(f, costs, opts)?
                .into_iter()
                .map(|r| FrontierPoint {
                    params: params.clone(),
                    z: z_value(&r.profile, costs),
                    profile: r.profile,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let points: Vec<FrontierPoint> = solved.into_iter().flatten().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let samples: Vec<Contract> = (0..non_sge_samples)
        .map(|_| random_sub_budget_fgn(n, &mut rng))
        .collect();
    let checks: Vec<Vec<DominanceCheck>> = samples
        .par_iter()
        .map(|g| {
            Ok(find_equilibria(g, costs, opts)?
                .into_iter()
                .map(|r| {
                    let needed = points
                        .iter()
                        .map(|pt| {
                            r.profile
                                .iter()
                                .zip(pt.profile.iter())
                                .map(|(q, p)| (q - p).max(0.0))
                                .fold(0.0, f64::max)
                        })
                        .fold(f64::INFINITY, f64::min);
                    DominanceCheck {
                        z: z_value(&r.profile, costs),
                        profile: r.profile,
                        needed_slack: needed,
                        dominated: needed <= slack,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let checks: Vec<DominanceCheck> = checks.into_iter().flatten().collect();
    let warnings = checks
        .iter()
        .filter(|c| !c.dominated)
        .map(|c| {
            format!(
                "GridTooCoarse: equilibrium {:?} needs slack {:.3e} > {:.3e}",
                &*c.profile, c.needed_slack, slack
            )
        })
        .collect();
    Ok(FrontierReport {
        grid_step: step,
        slack,
        points,
        checks,
        warnings,
    })
}
