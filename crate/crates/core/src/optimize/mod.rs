//! The principal's problem: maximize `V(p)` over equilibria of Luce
//! contracts, searching every ordered partition and the in-tier weights.

mod nelder_mead;
mod partitions;
mod two_agent;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{best_equilibrium, SolverOptions};
use crate::error::{Error, Result};
use crate::model::{CostModel, LuceSpec, Profile};
use crate::sampling::dirichlet;

pub use partitions::{ordered_partitions, MAX_EXHAUSTIVE_AGENTS};
pub use two_agent::{
    two_agent_derivatives, two_agent_equilibrium, two_agent_optimal_lambda, two_agent_thresholds,
};

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The principal's value of an effort profile.
#[derive(Clone)]
pub enum Objective {
    /// `sum_i w_i p_i` with positive weights.
    Linear { weights: Vec<f64> },
    /// Any value function; the caller asserts it is strictly increasing.
    Custom(ValueFn),
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Linear { weights } => f.debug_struct("Linear").field("weights", weights).finish(),
            Objective::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl Objective {
    pub fn linear(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("linear objective needs weights"));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid(format!(
                "objective weight {} of agent {} must be positive",
                weights[i],
                i + 1
            )));
        }
        Ok(Objective::Linear { weights })
    }

    pub fn custom<F: Fn(&[f64]) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Objective::Custom(Arc::new(f))
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        match self {
            Objective::Linear { weights } => weights.iter().zip(p).map(|(w, x)| w * x).sum(),
            Objective::Custom(f) => f(p),
        }
    }

    /// Coordinates along which `V` was seen to decrease on a probe grid.
    pub fn decreasing_coordinates(&self, n: usize) -> Vec<usize> {
        const H: f64 = 1e-3;
        (0..n)
            .filter(|&i| {
                [0.1, 0.3, 0.5, 0.7, 0.9].iter().any(|&x| {
                    let mut p = vec![x; n];
                    let lo = self.value(&p);
                    p[i] += H;
                    self.value(&p) < lo
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeOptions {
    /// Equilibrium solver used for every candidate.
    pub solver: SolverOptions,
    /// Upper bound on coarse grid points per partition.
    pub max_grid_points: usize,
    pub restarts: usize,
    /// Initial simplex side on weight coordinates.
    pub simplex_side: f64,
    pub weight_tolerance: f64,
    pub max_evaluations: usize,
    /// Relative value gap below which an earlier candidate is kept.
    pub tie_tolerance: f64,
    /// Extra partitions (0-based) searched when `n` is too large for
    /// exhaustive enumeration.
    pub partitions: Vec<Vec<Vec<usize>>>,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            solver: SolverOptions {
                tolerance: 1e-13,
                starts: 4,
                ..SolverOptions::default()
            },
            max_grid_points: 200,
            restarts: 4,
            simplex_side: 0.1,
            weight_tolerance: 1e-10,
            max_evaluations: 4_000,
            tie_tolerance: 1e-14,
            partitions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub spec: LuceSpec,
    pub equilibrium: Profile,
    pub value: f64,
    /// Number of candidate contracts evaluated.
    pub search_trace: usize,
    pub warnings: Vec<String>,
}

/// Weights below this are clamped before renormalizing.
const MIN_WEIGHT: f64 = 1e-12;

pub fn optimize_principal(
    objective: &Objective,
    costs: &CostModel,
    opts: &OptimizeOptions,
) -> Result<Optimum> {
    let n = costs.n();
    opts.solver.validate()?;
    if let Objective::Linear { weights } = objective {
        if weights.len() != n {
            return Err(Error::invalid(format!(
                "objective has {} weights for {n} agents",
                weights.len()
            )));
        }
    }
    let mut warnings = Vec::new();
    if let Objective::Custom(_) = objective {
        for i in objective.decreasing_coordinates(n) {
            warnings.push(format!(
                "ObjectiveNotIncreasing: value decreases along agent {}",
                i + 1
            ));
        }
    }
    let candidates: Vec<Vec<Vec<usize>>> = if n <= MAX_EXHAUSTIVE_AGENTS {
        ordered_partitions(n)
    } else {
        let mut list = vec![vec![(0..n).collect::<Vec<_>>()]];
        for part in &opts.partitions {
            let spec = LuceSpec::new(part.clone(), vec![1.0; n])?;
            if !list.contains(&spec.tiers().to_vec()) {
                list.push(spec.tiers().to_vec());
            }
        }
        list
    };
    let results: Vec<Result<Candidate>> = candidates
        .par_iter()
        .enumerate()
        .map(|(k, tiers)| search_partition(tiers, objective, costs, opts, k as u64))
        .collect();
    let mut best: Option<Candidate> = None;
    let mut evaluations = 0;
    for r in results {
        let c = r?;
        evaluations += c.evaluations;
        let better = match &best {
            None => c.value.is_finite(),
            Some(b) => c.value > b.value + opts.tie_tolerance * b.value.abs().max(1.0),
        };
        if better {
            best = Some(c);
        }
    }
    let best = best.ok_or_else(|| Error::NoConvergence {
        iterations: opts.solver.max_iterations,
        best_residual: f64::INFINITY,
        partial: Vec::new(),
    })?;
    Ok(Optimum {
        spec: best.spec,
        equilibrium: best.profile,
        value: best.value,
        search_trace: evaluations,
        warnings,
    })
}

struct Candidate {
    spec: LuceSpec,
    profile: Profile,
    value: f64,
    evaluations: usize,
}

/// Free weight coordinates: one per member of each multi-agent tier.
fn free_tiers(tiers: &[Vec<usize>]) -> Vec<&Vec<usize>> {
    tiers.iter().filter(|t| t.len() > 1).collect()
}

fn spec_from(tiers: &[Vec<usize>], x: &[f64], n: usize) -> LuceSpec {
    let mut weights = vec![1.0; n];
    let mut k = 0;
    for tier in free_tiers(tiers) {
        for &i in tier {
            weights[i] = x[k].max(MIN_WEIGHT);
            k += 1;
        }
    }
    LuceSpec::new(tiers.to_vec(), weights).expect("partition and clamped weights are valid")
}

/// Value of the best equilibrium, `-inf` when the solver fails.
fn evaluate(spec: &LuceSpec, objective: &Objective, costs: &CostModel, solver: &SolverOptions) -> Option<(Profile, f64)> {
    best_equilibrium(&spec.expand(), costs, solver, |p| objective.value(p))
        .ok()
        .map(|(r, v)| (r.profile, v))
}

fn search_partition(
    tiers: &[Vec<usize>],
    objective: &Objective,
    costs: &CostModel,
    opts: &OptimizeOptions,
    stream: u64,
) -> Result<Candidate> {
    let n = costs.n();
    let sizes: Vec<usize> = free_tiers(tiers).iter().map(|t| t.len()).collect();
    let mut evaluations = 0;
    let score = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        evaluate(&spec_from(tiers, x, n), objective, costs, &opts.solver)
            .map_or(f64::NEG_INFINITY, |(_, v)| v)
    };
    if sizes.is_empty() {
        let spec = spec_from(tiers, &[], n);
        let (profile, value) = evaluate(&spec, objective, costs, &opts.solver)
            .unwrap_or((Profile::zeros(n), f64::NEG_INFINITY));
        return Ok(Candidate { spec, profile, value, evaluations: 1 });
    }

    let mut best_x = Vec::new();
    let mut best_v = f64::NEG_INFINITY;
    for x in product_grid(&sizes, opts.max_grid_points) {
        let v = score(&x, &mut evaluations);
        if v > best_v {
            best_v = v;
            best_x = x;
        }
    }
    if best_x.is_empty() {
        best_x = vec![0.0; sizes.iter().sum()];
        for_each_block(&sizes, &mut best_x, |block| block.fill(1.0 / block.len() as f64));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.solver.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut starts = vec![best_x.clone()];
    while starts.len() < opts.restarts.max(1) {
        let mut x = vec![0.0; best_x.len()];
        for_each_block(&sizes, &mut x, |block| {
            block.copy_from_slice(&dirichlet(block.len(), &mut rng));
        });
        starts.push(x);
    }
    for start in starts {
        let project = |x: &[f64]| project_blocks(&sizes, x);
        let r = nelder_mead::maximize(
            |x| score(&project(x), &mut evaluations),
            &start,
            opts.simplex_side,
            opts.weight_tolerance,
            0.0,
            opts.max_evaluations,
        );
        if r.value > best_v {
            best_v = r.value;
            best_x = project(&r.x);
        }
    }
    let spec = spec_from(tiers, &best_x, n);
    let (profile, value) = evaluate(&spec, objective, costs, &opts.solver)
        .unwrap_or((Profile::zeros(n), f64::NEG_INFINITY));
    Ok(Candidate { spec, profile, value, evaluations: evaluations + 1 })
}

fn for_each_block<F: FnMut(&mut [f64])>(sizes: &[usize], x: &mut [f64], mut f: F) {
    let mut start = 0;
    for &m in sizes {
        f(&mut x[start..start + m]);
        start += m;
    }
}

/// Clamp to `MIN_WEIGHT` and renormalize each block.
fn project_blocks(sizes: &[usize], x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().map(|v| v.max(MIN_WEIGHT)).collect();
    for_each_block(sizes, &mut out, |block| {
        let total: f64 = block.iter().sum();
        block.iter_mut().for_each(|v| *v /= total);
    });
    out
}

/// Points of a simplex grid of resolution `r`.
fn simplex_grid(m: usize, r: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, r: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if m == 1 {
            cur.push(left as f64 / r as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k as f64 / r as f64);
            rec(m - 1, left - k, r, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, r, r, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, j| acc.saturating_mul(n - j) / (j + 1))
}

/// Product of per-block simplex grids with the finest common resolution
/// (at most 10) that keeps the point count within `budget`.
fn product_grid(sizes: &[usize], budget: usize) -> Vec<Vec<f64>> {
    let count = |r: usize| {
        sizes
            .iter()
            .fold(1usize, |acc, &m| acc.saturating_mul(binomial(r + m - 1, m - 1)))
    };
    let r = (1..=10).rev().find(|&r| count(r) <= budget).unwrap_or(1);
    let mut points = vec![Vec::new()];
    for &m in sizes {
        let grid = simplex_grid(m, r);
        points = points
            .into_iter()
            .flat_map(|prefix| {
                grid.iter().map(move |g| {
                    let mut x = prefix.clone();
                    x.extend_from_slice(g);
                    x
                })
            })
            .collect();
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(c: &[f64]) -> CostModel {
        CostModel::quadratic(c).unwrap()
    }

    #[test]
    fn grids() {
        assert_eq!(simplex_grid(2, 10).len(), 11);
        assert_eq!(simplex_grid(3, 4).len(), 15);
        assert_eq!(product_grid(&[2, 2], 200).len(), 121);
        assert!(product_grid(&[6], 200).len() <= 200);
        let x = project_blocks(&[2, 1], &[-1.0, 3.0, 5.0]);
        assert!((x[0] - MIN_WEIGHT / (3.0 + MIN_WEIGHT)).abs() < 1e-20 && x[2] == 1.0);
    }

    #[test]
    fn symmetric_two_agents_split_equally() {
        let r = optimize_principal(
            &Objective::linear(vec![1.0, 1.0]).unwrap(),
            &quad(&[2.0, 2.0]),
            &OptimizeOptions::default(),
        )
        .unwrap();
        assert_eq!(r.spec.tiers(), &[vec![0, 1]]);
        assert!((r.spec.weights()[0] - 0.5).abs() < 1e-4);
        assert!((r.value - 0.8).abs() < 1e-9);
        assert!(r.search_trace > 3);
    }

    #[test]
    fn heavy_weight_gives_priority() {
        let r = optimize_principal(
            &Objective::linear(vec![3.0, 1.0]).unwrap(),
            &quad(&[2.0, 2.0]),
            &OptimizeOptions::default(),
        )
        .unwrap();
        assert_eq!(r.spec.tiers(), &[vec![0], vec![1]]);
        assert!((r.value - 1.75).abs() < 1e-12);
    }

    #[test]
    fn single_agent() {
        let r = optimize_principal(
            &Objective::linear(vec![1.0]).unwrap(),
            &quad(&[2.0]),
            &OptimizeOptions::default(),
        )
        .unwrap();
        assert!((r.equilibrium[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decreasing_custom_objective_warns() {
        let obj = Objective::custom(|p| p[0] - p[1]);
        assert_eq!(obj.decreasing_coordinates(2), vec![1]);
        let r = optimize_principal(&obj, &quad(&[2.0, 2.0]), &OptimizeOptions::default()).unwrap();
        assert!(r.warnings[0].starts_with("ObjectiveNotIncreasing"));
        assert!(Objective::linear(vec![1.0, -1.0]).is_err());
    }
}
