//! Seeded random generators for contracts, costs and Luce specs.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::model::{all_subsets, Contract, CostFn, CostModel, LuceSpec};

/// A flat Dirichlet(1, ..., 1) draw of length `k`.
pub fn dirichlet<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = (0..k)
        .map(|_| {
            let e: f64 = Exp1.sample(rng);
            e.max(1e-300)
        })
        .collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|e| e / total).collect()
}

/// Random SGE contract: each nonempty outcome splits the whole budget among
/// its successful agents by an independent Dirichlet draw.
pub fn random_sge<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Contract {
    fill_fgn(n, rng, false)
}

/// Random FGN contract that leaves a strictly positive part of the budget
/// unspent on every outcome.
pub fn random_sub_budget_fgn<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Contract {
    fill_fgn(n, rng, true)
}

fn fill_fgn<R: Rng + ?Sized>(n: usize, rng: &mut R, slack: bool) -> Contract {
    let mut shares = vec![0.0; n << n];
    for s in all_subsets(n).skip(1) {
        let split = dirichlet(s.len() + usize::from(slack), rng);
        let start = s.bits() as usize * n;
        for (k, i) in s.agents().enumerate() {
            shares[start + i] = split[k];
        }
    }
    Contract::new(n, 1.0, shares, false).expect("sampled shares form a contract")
}

/// Power costs with scale in `[1.5, 4]` and exponent in `[2, 3]`; always
/// admissible under a unit budget.
pub fn random_power_costs<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CostModel {
    CostModel::new(
        (0..n)
            .map(|_| {
                CostFn::power(rng.random_range(1.5..=4.0), rng.random_range(2.0..=3.0))
                    .expect("sampled parameters are valid")
            })
            .collect(),
    )
    .expect("sampled cost model is valid")
}

/// Uniformly random ordered partition of `0..n`: a random permutation cut
/// at random points.
pub fn random_ordered_partition<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut tiers = vec![vec![order[0]]];
    for &i in &order[1..] {
        if rng.random_bool(0.5) {
            tiers.push(vec![i]);
        } else {
            tiers.last_mut().unwrap().push(i);
        }
    }
    tiers
}

/// Random tiers with Dirichlet weights inside each tier.
pub fn random_luce_spec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> LuceSpec {
    let tiers = random_ordered_partition(n, rng);
    let mut weights = vec![0.0; n];
    for tier in &tiers {
        for (&i, w) in tier.iter().zip(dirichlet(tier.len(), rng)) {
            weights[i] = w;
        }
    }
    LuceSpec::new(tiers, weights).expect("sampled spec is valid")
}
