//! Synthesis of the Luce contract implementing a target profile.
//!
//! The priority tiers are read off the tight sets of the implementability
//! condition; the budget follows from the aggregate identity; within each
//! tier the weights are the unique solution of `r_i(w) = c_i'(p_i)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{find_equilibria, residual, response_to_gain, SolverOptions};
use crate::error::{Error, Result};
use crate::maximal::{luce_condition, ConditionReport};
use crate::model::{CostModel, LuceSpec, Profile, Subset};
use crate::numeric::max_abs_diff;
use crate::sampling::{dirichlet, random_ordered_partition};

/// `sum_i p_i c_i'(p_i) / P[S ≠ ∅]`.
pub fn required_budget(p: &Profile, costs: &CostModel) -> Result<f64> {
    p.require_interior()?;
    if p.len() != costs.n() {
        return Err(Error::invalid("profile and cost model sizes differ"));
    }
    let none = p.iter().map(|pi| 1.0 - pi).product::<f64>();
    Ok(costs.weighted_marginal_cost(p) / (1.0 - none))
}

/// Ordered partition from the chain of tight sets: the tiers are the
/// successive differences `T_1, T_2 \ T_1, ...`.
pub fn derive_partition(report: &ConditionReport) -> Result<Vec<Vec<usize>>> {
    let mut chain = report.tight_sets.clone();
    chain.sort_by_key(|s| (s.len(), s.bits()));
    let mut tiers = Vec::with_capacity(chain.len());
    let mut prev = Subset::EMPTY;
    for s in chain {
        if !prev.is_subset_of(s) || prev == s {
            return Err(Error::InconsistentTightSets {
                first: prev.bits(),
                second: s.bits(),
            });
        }
        tiers.push(s.intersection(Subset(!prev.bits())).agents().collect());
        prev = s;
    }
    Ok(tiers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisOptions {
    /// Target ∞-norm equilibrium residual of the expanded contract at `p`.
    pub tolerance: f64,
    /// Total weight sweeps (multiplicative plus Newton) per tier.
    pub max_iterations: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            tolerance: 1e-10,
            max_iterations: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisResult {
    pub spec: LuceSpec,
    pub budget: f64,
    /// `max_i |p_i - b_i(f, p_{-i})|` for the expanded contract.
    pub residual: f64,
    pub tight_chain: Vec<Subset>,
}

/// Multiplicative sweeps before switching to Newton steps.
const MULTIPLICATIVE_SWEEPS: usize = 100;
const MIN_EXPONENT: f64 = 1.0 / 16.0;

pub fn synthesize_luce(
    p: &Profile,
    costs: &CostModel,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    let report = luce_condition(p, costs)?;
    if !report.holds {
        return Err(Error::NotLuceImplementable {
            subset_bits: report.worst_subset.bits(),
            lhs: report.lhs,
            rhs: report.rhs,
        });
    }
    let budget = required_budget(p, costs)?;
    let tiers = derive_partition(&report)?;
    let mut weights = vec![0.0; p.len()];
    let mut above = 1.0;
    for tier in &tiers {
        let solver = TierSolver {
            members: tier,
            p,
            costs,
            scale: budget * above,
        };
        for (&i, w) in tier.iter().zip(solver.solve(opts)?) {
            weights[i] = w;
        }
        above *= tier.iter().map(|&i| 1.0 - p[i]).product::<f64>();
    }
    let spec = LuceSpec::new(tiers, weights)?;
    let f = spec.expand_with_budget(budget)?;
    let res = residual(&f, p, costs)?;
    if res > opts.tolerance {
        return Err(Error::NoConvergence {
            iterations: opts.max_iterations,
            best_residual: res,
            partial: Vec::new(),
        });
    }
    Ok(SynthesisResult {
        spec,
        budget,
        residual: res,
        tight_chain: report.tight_sets,
    })
}

/// Weight solve for one tier. `scale` is the budget times the probability
/// that every higher tier fails.
struct TierSolver<'a> {
    members: &'a [usize],
    p: &'a Profile,
    costs: &'a CostModel,
    scale: f64,
}

impl TierSolver<'_> {
    /// Gains of all members under tier weights `w` (aligned with `members`).
    fn gains(&self, w: &[f64]) -> Vec<f64> {
        let m = self.members.len();
        let q: Vec<f64> = self.members.iter().map(|&i| self.p[i]).collect();
        (0..m)
            .map(|k| {
                let others: Vec<usize> = (0..m).filter(|&j| j != k).collect();
                let rows = 1usize << others.len();
                let mut prob = vec![1.0; rows];
                let mut mass = vec![0.0; rows];
                let mut gain = 0.0;
                for mask in 0..rows {
                    if mask > 0 {
                        let b = mask.trailing_zeros() as usize;
                        let rest = mask & (mask - 1);
                        let j = others[b];
                        prob[mask] = prob[rest] * q[j] / (1.0 - q[j]);
                        mass[mask] = mass[rest] + w[j];
                    }
                    gain += prob[mask] * w[k] / (w[k] + mass[mask]);
                }
                let none: f64 = others.iter().map(|&j| 1.0 - q[j]).product();
                self.scale * none * gain
            })
            .collect()
    }

    fn responses_gap(&self, gains: &[f64]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (&i, &g) in self.members.iter().zip(gains) {
            worst = worst.max((response_to_gain(i, g, self.costs)? - self.p[i]).abs());
        }
        Ok(worst)
    }

    fn log_errors(&self, w: &[f64]) -> Vec<f64> {
        self.members
            .iter()
            .zip(self.gains(w))
            .map(|(&i, g)| g.ln() - self.costs.derivative(i, self.p[i]).ln())
            .collect()
    }

    fn solve(&self, opts: &SynthesisOptions) -> Result<Vec<f64>> {
        let m = self.members.len();
        if m == 1 {
            return Ok(vec![1.0]);
        }
        let target: Vec<f64> = self
            .members
            .iter()
            .map(|&i| self.costs.derivative(i, self.p[i]))
            .collect();
        let mut w: Vec<f64> = normalized(target.clone());
        let mut exponent: f64 = 1.0;
        let mut best = (f64::INFINITY, w.clone());
        for sweep in 0..opts.max_iterations {
            let gains = self.gains(&w);
            let gap = self.responses_gap(&gains)?;
            if gap < best.0 {
                best = (gap, w.clone());
            } else {
                exponent = (exponent * 0.5).max(MIN_EXPONENT);
            }
            if gap <= 0.1 * opts.tolerance {
                return Ok(w);
            }
            if sweep < MULTIPLICATIVE_SWEEPS {
                for k in 0..m {
                    w[k] *= (target[k] / gains[k]).powf(exponent).clamp(0.5, 2.0);
                }
                w = normalized(w);
            } else {
                w = self.newton_step(&best.1);
            }
        }
        if best.0 <= opts.tolerance {
            return Ok(best.1);
        }
        Err(Error::NoConvergence {
            iterations: opts.max_iterations,
            best_residual: best.0,
            partial: Vec::new(),
        })
    }

    /// One damped Newton step on log-weights with the last weight held
    /// fixed; the last equation follows from the others by tightness.
    fn newton_step(&self, w: &[f64]) -> Vec<f64> {
        let m = w.len();
        let u: Vec<f64> = w.iter().map(|x| x.ln()).collect();
        let eval = |u: &[f64]| self.log_errors(&u.iter().map(|x| x.exp()).collect::<Vec<_>>());
        let f0 = eval(&u);
        let k = m - 1;
        let h = 1e-6;
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += h;
            dn[j] -= h;
            let (fu, fd) = (eval(&up), eval(&dn));
            for i in 0..k {
                jac[(i, j)] = (fu[i] - fd[i]) / (2.0 * h);
            }
        }
        let rhs = -DVector::from_column_slice(&f0[..k]);
        let Some(step) = jac.lu().solve(&rhs) else {
            return w.to_vec();
        };
        let norm0 = f0.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let mut t = 1.0;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..m)
                .map(|j| if j < k { u[j] + t * step[j] } else { u[j] })
                .collect();
            let norm = eval(&trial).iter().fold(0.0f64, |a, x| a.max(x.abs()));
            if norm < norm0 {
                return normalized(trial.iter().map(|x| x.exp()).collect());
            }
            t *= 0.5;
        }
        w.to_vec()
    }
}

fn normalized(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// Perturbed specs that were distinct from the synthesized one.
    pub distinct_trials: usize,
    /// Smallest ∞-norm distance between `p` and any equilibrium of a perturbed spec.
    pub worst_separation: f64,
    pub worst_spec: Option<LuceSpec>,
}

/// Mixing fraction toward random weights in [`jitter_weights`].
pub const JITTER_RANGE: std::ops::RangeInclusive<f64> = 0.1..=0.5;

/// Smallest absolute change of some weight per jittered tier.
pub const MIN_WEIGHT_SHIFT: f64 = 0.1;

/// Specs closer than this are the same contract.
const SAME_SPEC_TOL: f64 = 1e-12;

/// Perturbed copy of `spec`: the weights of every multi-agent tier are
/// mixed toward a flat Dirichlet draw, `w' = (1 - t) w + t d` with `t`
/// uniform in [`JITTER_RANGE`], redrawn until some weight moves by at least
/// 1% relative and by [`MIN_WEIGHT_SHIFT`] absolute. Returns `None` when
/// every tier is a singleton.
///
/// A relative floor alone is not enough: a tier whose weights are very
/// uneven barely reacts to relative changes of its small weights.
pub fn jitter_weights<R: Rng + ?Sized>(spec: &LuceSpec, rng: &mut R) -> Option<LuceSpec> {
    let w = spec.weights();
    let mut out = w.to_vec();
    let mut changed = false;
    for tier in spec.tiers().iter().filter(|t| t.len() > 1) {
        loop {
            let t = rng.random_range(JITTER_RANGE);
            let d = dirichlet(tier.len(), rng);
            let (mut relative, mut absolute) = (0.0f64, 0.0f64);
            for (&i, di) in tier.iter().zip(&d) {
                out[i] = (1.0 - t) * w[i] + t * di;
                relative = relative.max((out[i] / w[i] - 1.0).abs());
                absolute = absolute.max((out[i] - w[i]).abs());
            }
            if relative >= 0.01 && absolute >= MIN_WEIGHT_SHIFT {
                break;
            }
        }
        changed = true;
    }
    changed.then(|| LuceSpec::new(spec.tiers().to_vec(), out).expect("mixed weights stay positive"))
}

/// Random spec with a partition different from `spec`'s, or `None` for one
/// agent. Weights are mixed halfway toward uniform so that no member of an
/// `m`-agent tier gets less than `1 / (2m)`: with a vanishing weight a
/// weighted tier approaches a priority split and could mimic `spec`.
pub fn alternative_partition<R: Rng + ?Sized>(spec: &LuceSpec, rng: &mut R) -> Option<LuceSpec> {
    if spec.n() == 1 {
        return None;
    }
    loop {
        let tiers = random_ordered_partition(spec.n(), rng);
        if tiers.as_slice() == spec.tiers() {
            continue;
        }
        let mut weights = vec![0.0; spec.n()];
        for tier in &tiers {
            let m = tier.len() as f64;
            for (&i, d) in tier.iter().zip(dirichlet(tier.len(), rng)) {
                weights[i] = 0.5 / m + 0.5 * d;
            }
        }
        let alt = LuceSpec::new(tiers, weights).expect("mixed weights are positive");
        if alt.tiers() != spec.tiers() {
            return Some(alt);
        }
    }
}

/// Checks that `trials` perturbed or re-partitioned specs, at the same
/// budget, all have equilibria away from `p`. Even trials jitter weights
/// (falling back to a new partition when no tier has two members), odd
/// trials draw a new partition.
///
/// Fails with [`Error::UniquenessViolation`] if some distinct spec has an
/// equilibrium within `tolerance` of `p`.
pub fn verify_uniqueness(
    result: &SynthesisResult,
    p: &Profile,
    costs: &CostModel,
    trials: usize,
    tolerance: f64,
    opts: &SolverOptions,
) -> Result<UniquenessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = UniquenessReport {
        distinct_trials: 0,
        worst_separation: f64::INFINITY,
        worst_spec: None,
    };
    for t in 0..trials {
        let candidate = if t % 2 == 0 {
            jitter_weights(&result.spec, &mut rng).or_else(|| alternative_partition(&result.spec, &mut rng))
        } else {
            alternative_partition(&result.spec, &mut rng)
        };
        let Some(spec) = candidate else { continue };
        if spec.approx_eq(&result.spec, SAME_SPEC_TOL) {
            continue;
        }
        report.distinct_trials += 1;
        let f = spec.expand_with_budget(result.budget)?;
        let separation = find_equilibria(&f, costs, opts)?
            .iter()
            .map(|r| max_abs_diff(&r.profile, p))
            .fold(f64::INFINITY, f64::min);
        if separation <= tolerance {
            return Err(Error::UniquenessViolation { separation });
        }
        if separation < report.worst_separation {
            report.worst_separation = separation;
            report.worst_spec = Some(spec);
        }
    }
    Ok(report)
}
