//! Marginal gains, best responses and pure Nash equilibria of the effort game.
//!
//! Agent `i` facing contract `f` and the others' profile `p_{-i}` solves
//! `c_i'(p_i) = max{0, r_i}` where `r_i` is the budget-scaled expected gain
//! in reward from succeeding rather than failing. Equilibria are fixed
//! points of the joint best-response map, found by damped simultaneous
//! iteration from several starting profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{all_subsets, outcome_table, Contract, CostModel, Profile};
use crate::numeric::max_abs_diff;

/// Fixed points closer than this (∞-norm) are reported once.
pub const DEDUP_TOL: f64 = 1e-6;
const STALL_WINDOW: usize = 10;
const MIN_DAMPING: f64 = 1.0 / 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 10_000,
            damping: 1.0,
            starts: 8,
            seed: 0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("solver damping must lie in (0, 1]"));
        }
        if self.starts == 0 || self.max_iterations == 0 {
            return Err(Error::invalid(
                "solver needs at least one start and one iteration",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub profile: Profile,
    /// `max_i |p_i - b_i(f, p_{-i})|`.
    pub max_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `r_i(f, p_{-i}) = B * sum_{S ⊆ [n]∖i} Pr(S) (f_i(S ∪ i) - f_i(S))`. Ignores `p_i`.
pub fn marginal_gain(i: usize, f: &Contract, p: &[f64]) -> f64 {
    let probs = outcome_table(p, Some(i));
    let gain: f64 = all_subsets(f.n())
        .filter(|s| !s.contains(i))
        .map(|s| probs[s.bits() as usize] * (f.share(i, s.with(i)) - f.share(i, s)))
        .sum();
    f.budget() * gain
}

/// Unique maximizer of `E[B f_i(S)] - c_i(p_i)` given `p_{-i}`.
pub fn best_response(i: usize, f: &Contract, p: &[f64], costs: &CostModel) -> Result<f64> {
    let gain = marginal_gain(i, f, p);
    response_to_gain(i, gain, costs)
}

pub(crate) fn response_to_gain(i: usize, gain: f64, costs: &CostModel) -> Result<f64> {
    let target = gain.max(0.0);
    let top = costs.agent(i).derivative_at_one();
    if top <= target {
        return Err(Error::NotAdmissible {
            agent: i,
            derivative_at_one: top,
            gain,
        });
    }
    Ok(costs.inverse_derivative(i, target))
}

pub fn best_responses(f: &Contract, p: &[f64], costs: &CostModel) -> Result<Vec<f64>> {
    (0..f.n()).map(|i| best_response(i, f, p, costs)).collect()
}

/// ∞-norm distance between `p` and the joint best response to it.
pub fn residual(f: &Contract, p: &[f64], costs: &CostModel) -> Result<f64> {
    Ok(max_abs_diff(&best_responses(f, p, costs)?, p))
}

fn check_dims(f: &Contract, costs: &CostModel) -> Result<()> {
    if f.n() != costs.n() {
        return Err(Error::invalid(format!(
            "contract has {} agents but cost model has {}",
            f.n(),
            costs.n()
        )));
    }
    Ok(())
}

/// Highest effort any agent can be induced to exert: the best response to
/// the largest share the contract ever pays that agent.
fn solo_optimum(f: &Contract, costs: &CostModel) -> Vec<f64> {
    (0..f.n())
        .map(|i| {
            let top = all_subsets(f.n())
                .map(|s| f.share(i, s))
                .fold(0.0, f64::max);
            let r = (f.budget() * top).min(costs.agent(i).derivative_at_one());
            costs.inverse_derivative(i, r).min(1.0 - 1e-9)
        })
        .collect()
}

fn initial_profiles(f: &Contract, costs: &CostModel, opts: &SolverOptions) -> Vec<Vec<f64>> {
    let n = f.n();
    let solo = solo_optimum(f, costs);
    let mut starts = vec![vec![0.0; n]];
    if opts.starts > 1 {
        starts.push(solo.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < opts.starts {
        starts.push(solo.iter().map(|&hi| rng.random::<f64>() * hi).collect());
    }
    starts
}

/// Iterates damped simultaneous best responses from one start.
fn iterate_from(
    f: &Contract,
    costs: &CostModel,
    start: Vec<f64>,
    opts: &SolverOptions,
) -> Result<EquilibriumResult> {
    let mut p = start;
    let mut damping = opts.damping;
    let mut history: Vec<f64> = Vec::with_capacity(STALL_WINDOW + 1);
    let mut best = (f64::INFINITY, p.clone());
    for it in 0..opts.max_iterations {
        let b = best_responses(f, &p, costs)?;
        let res = max_abs_diff(&b, &p);
        if res < best.0 {
            best = (res, p.clone());
        }
        if res <= opts.tolerance {
            return Ok(EquilibriumResult {
                profile: Profile::new(p)?,
                max_residual: res,
                iterations: it,
                converged: true,
            });
        }
        history.push(res);
        if history.len() > STALL_WINDOW {
            if res >= history[0] && damping > MIN_DAMPING {
                damping = (damping * 0.5).max(MIN_DAMPING);
                history.clear();
            } else {
                history.remove(0);
            }
        }
        for (pi, bi) in p.iter_mut().zip(&b) {
            *pi += damping * (bi - *pi);
        }
    }
    Ok(EquilibriumResult {
        profile: Profile::new(best.1)?,
        max_residual: best.0,
        iterations: opts.max_iterations,
        converged: false,
    })
}

/// Every distinct fixed point reached from the configured starts, sorted
/// by total effort (descending).
///
/// Errors with [`Error::NoConvergence`] only when no start converges; the
/// unconverged iterates are attached as `partial`.
pub fn find_equilibria(
    f: &Contract,
    costs: &CostModel,
    opts: &SolverOptions,
) -> Result<Vec<EquilibriumResult>> {
    check_dims(f, costs)?;
    opts.validate()?;
    let runs = initial_profiles(f, costs, opts)
        .into_iter()
        .map(|start| iterate_from(f, costs, start, opts))
        .collect::<Result<Vec<_>>>()?;
    let (converged, failed): (Vec<_>, Vec<_>) = runs.into_iter().partition(|r| r.converged);
    if converged.is_empty() {
        let best_residual = failed
            .iter()
            .map(|r| r.max_residual)
            .fold(f64::INFINITY, f64::min);
        return Err(Error::NoConvergence {
            iterations: opts.max_iterations,
            best_residual,
            partial: failed,
        });
    }
    let mut unique: Vec<EquilibriumResult> = Vec::new();
    for r in converged {
        match unique
            .iter_mut()
            .find(|u| max_abs_diff(&u.profile, &r.profile) <= DEDUP_TOL)
        {
            Some(u) if r.max_residual < u.max_residual => *u = r,
            Some(_) => {}
            None => unique.push(r),
        }
    }
    unique.sort_by(|a, b| {
        b.profile
            .total()
            .total_cmp(&a.profile.total())
            .then_with(|| a.profile.partial_cmp(&b.profile).unwrap())
    });
    Ok(unique)
}

/// Best equilibrium under `value`, the principal's selection rule.
pub fn best_equilibrium<V: Fn(&[f64]) -> f64>(
    f: &Contract,
    costs: &CostModel,
    opts: &SolverOptions,
    value: V,
) -> Result<(EquilibriumResult, f64)> {
    find_equilibria(f, costs, opts)?
        .into_iter()
        .map(|r| {
            let v = value(&r.profile);
            (r, v)
        })
        .reduce(|a, b| if b.1 > a.1 { b } else { a })
        .ok_or_else(|| Error::invalid("solver returned no equilibria"))
}

/// Rescales `f` into a failures-get-nothing contract with `p` still an
/// equilibrium: `g_i(S) = λ_i f_i(S)` for `i ∈ S`, with
/// `λ_i = r_i / E[f_i | i ∈ S]` (zero when `p_i = 0`).
pub fn fgn_normalize(
    f: &Contract,
    p: &Profile,
    costs: &CostModel,
    tolerance: f64,
) -> Result<Contract> {
    check_dims(f, costs)?;
    let res = residual(f, p, costs)?;
    if res > tolerance {
        return Err(Error::NotAnEquilibrium { residual: res, tolerance });
    }
    let n = f.n();
    let scale: Vec<f64> = (0..n)
        .map(|i| {
            if p[i] == 0.0 {
                return 0.0;
            }
            let succ = f.expected_share_given_success(i, p);
            if succ <= 0.0 {
                0.0
            } else {
                (marginal_gain(i, f, p) / f.budget()).max(0.0) / succ
            }
        })
        .collect();
    let mut shares = vec![0.0; n << n];
    for s in all_subsets(n) {
        let start = s.bits() as usize * n;
        for i in s.agents() {
            shares[start + i] = scale[i] * f.share(i, s);
        }
    }
    let g = Contract::new(n, f.budget(), shares, f.is_unconstrained())?;
    let res = residual(&g, p, costs)?;
    if res > tolerance {
        return Err(Error::NotAnEquilibrium { residual: res, tolerance });
    }
    Ok(g)
}

/// `|sum_i p_i c_i'(p_i) - B E[sum_i f_i(S)]|`, zero at any equilibrium of an FGN contract.
pub fn aggregate_gap(f: &Contract, p: &[f64], costs: &CostModel) -> f64 {
    (costs.weighted_marginal_cost(p) - f.budget() * f.expected_total_share(p)).abs()
}
