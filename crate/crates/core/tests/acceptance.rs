//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! run with `--nocapture` to see them.

use luce_contracts::equilibrium::{aggregate_gap, find_equilibria, SolverOptions};
use luce_contracts::luce::{synthesize_luce, verify_uniqueness, SynthesisOptions};
use luce_contracts::maximal::{brute_force_frontier, luce_condition};
use luce_contracts::model::{
    all_subsets, outcome_prob, Contract, CostModel, LuceSpec, Profile, Subset,
};
use luce_contracts::optimize::{
    optimize_principal, two_agent_equilibrium, two_agent_optimal_lambda, two_agent_thresholds,
    Objective, OptimizeOptions,
};
use luce_contracts::payments::{implementing_fgn_samples, mps_compare, payment_distribution};
use luce_contracts::sampling::{
    random_luce_spec, random_power_costs, random_sge, random_sub_budget_fgn,
};
use luce_contracts::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// An FGN equilibrium kept for the aggregate-identity criterion.
struct Encountered {
    contract: Contract,
    costs: CostModel,
    profile: Vec<f64>,
}

fn tight() -> SolverOptions {
    SolverOptions {
        tolerance: 1e-13,
        ..SolverOptions::default()
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Two-agent SGE contract with `f_1({1,2}) = lambda`.
fn two_agent_contract(lambda: f64) -> Contract {
    Contract::from_fn(2, |s, i| match (s.len(), i) {
        (2, 0) => lambda,
        (2, _) => 1.0 - lambda,
        _ if s.contains(i) => 1.0,
        _ => 0.0,
    })
    .unwrap()
}

fn z_direct(p: &[f64], costs: &CostModel) -> f64 {
    let weighted: f64 = p.iter().enumerate().map(|(i, &x)| x * costs.derivative(i, x)).sum();
    weighted + p.iter().map(|x| 1.0 - x).product::<f64>()
}

fn lambda_of(spec: &LuceSpec) -> f64 {
    spec.expand().share(0, Subset::full(2))
}

fn criterion_1() -> Outcome {
    let scales = [1.5, 2.0, 4.0];
    let mut worst: f64 = 0.0;
    for &c1 in &scales {
        for &c2 in &scales {
            let costs = CostModel::quadratic(&[c1, c2]).unwrap();
            for k in 0..=20 {
                let lambda = k as f64 * 0.05;
                let (p1, p2) = two_agent_equilibrium(c1, c2, lambda).map_err(|e| e.to_string())?;
                let eqs = find_equilibria(&two_agent_contract(lambda), &costs, &tight())
                    .map_err(|e| e.to_string())?;
                let gap = eqs
                    .iter()
                    .map(|e| (e.profile[0] - p1).abs().max((e.profile[1] - p2).abs()))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(gap);
                ensure(gap <= 1e-8, || format!("C=({c1},{c2}) λ={lambda}: gap {gap:e}"))?;
            }
        }
    }
    Ok(format!("189 cases, worst gap {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let scales = [1.2, 2.0, 5.0, 20.0];
    let (mut formula, mut optimizer): (f64, f64) = (0.0, 0.0);
    for &c1 in &scales {
        for &c2 in &scales {
            let l = two_agent_optimal_lambda(c1, c2, 1.0).map_err(|e| e.to_string())?;
            formula = formula.max((l - 0.5).abs());
            let costs = CostModel::quadratic(&[c1, c2]).unwrap();
            let best = optimize_principal(
                &Objective::linear(vec![1.0, 1.0]).unwrap(),
                &costs,
                &OptimizeOptions::default(),
            )
            .map_err(|e| e.to_string())?;
            let lo = lambda_of(&best.spec);
            optimizer = optimizer.max((lo - 0.5).abs());
            ensure((l - 0.5).abs() <= 1e-10, || format!("C=({c1},{c2}) formula λ={l}"))?;
            ensure((lo - 0.5).abs() <= 1e-4, || format!("C=({c1},{c2}) optimizer λ={lo}"))?;
        }
    }
    Ok(format!("formula max |λ-1/2| {formula:.1e}, optimizer {optimizer:.1e}"))
}

fn criterion_3() -> Outcome {
    let (lo, hi) = two_agent_thresholds(2.0, 2.0).map_err(|e| e.to_string())?;
    // (C1C2-C1)/(C1C2+C2-1) and (C1C2+C1-1)/(C1C2-C2) at C = (2, 2)
    let (lo_hand, hi_hand) = (2.0 / 5.0, 5.0 / 2.0);
    ensure((lo - lo_hand).abs() <= f64::EPSILON && (hi - hi_hand).abs() <= 2.0 * f64::EPSILON, || {
        format!("thresholds ({lo}, {hi})")
    })?;
    for &w in &[0.05, 0.2, 0.3999, 0.4] {
        let l = two_agent_optimal_lambda(2.0, 2.0, w).map_err(|e| e.to_string())?;
        ensure(l == 0.0, || format!("w={w}: λ*={l}, expected 0"))?;
    }
    for &w in &[2.5, 2.5001, 4.0, 50.0] {
        let l = two_agent_optimal_lambda(2.0, 2.0, w).map_err(|e| e.to_string())?;
        ensure(l == 1.0, || format!("w={w}: λ*={l}, expected 1"))?;
    }
    for &w in &[0.41, 1.0, 2.49] {
        let l = two_agent_optimal_lambda(2.0, 2.0, w).map_err(|e| e.to_string())?;
        ensure(l > 0.0 && l < 1.0, || format!("w={w}: λ*={l} should be interior"))?;
    }
    let costs = CostModel::quadratic(&[2.0, 2.0]).unwrap();
    let mut worst: f64 = 0.0;
    for &(w, target) in &[(0.2, 0.0), (0.4, 0.0), (2.5, 1.0), (3.0, 1.0)] {
        let best = optimize_principal(
            &Objective::linear(vec![w, 1.0]).unwrap(),
            &costs,
            &OptimizeOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let l = lambda_of(&best.spec);
        worst = worst.max((l - target).abs());
        ensure((l - target).abs() <= 1e-6, || format!("optimizer at w={w}: λ={l}"))?;
    }
    Ok(format!("thresholds ({lo}, {hi}); optimizer corner error {worst:.1e}"))
}

fn criterion_4(seen: &mut Vec<Encountered>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for k in 0..200 {
        let n = 2 + k % 3;
        let f = random_sge(n, &mut rng);
        let costs = random_power_costs(n, &mut rng);
        for eq in find_equilibria(&f, &costs, &SolverOptions::default()).map_err(|e| e.to_string())? {
            let z = z_direct(&eq.profile, &costs);
            worst = worst.max((z - 1.0).abs());
            count += 1;
            ensure((z - 1.0).abs() <= 1e-8, || format!("SGE #{k} (n={n}): z={z}"))?;
            seen.push(Encountered { contract: f.clone(), costs: costs.clone(), profile: eq.profile.to_vec() });
        }
    }
    let mut highest = f64::NEG_INFINITY;
    for k in 0..100 {
        let n = 2 + k % 3;
        let f = random_sub_budget_fgn(n, &mut rng);
        let costs = random_power_costs(n, &mut rng);
        for eq in find_equilibria(&f, &costs, &SolverOptions::default()).map_err(|e| e.to_string())? {
            let z = z_direct(&eq.profile, &costs);
            highest = highest.max(z);
            ensure(z < 1.0, || format!("sub-budget #{k} (n={n}): z={z}"))?;
            seen.push(Encountered { contract: f.clone(), costs: costs.clone(), profile: eq.profile.to_vec() });
        }
    }
    Ok(format!("{count} SGE equilibria, max |z-1| {worst:.1e}; sub-budget max z {highest:.4}"))
}

fn criterion_5(seen: &mut Vec<Encountered>) -> Outcome {
    let costs = CostModel::quadratic(&[2.0, 2.0]).unwrap();
    let slack = 0.02;
    let report = brute_force_frontier(&costs, 100, 50, &tight()).map_err(|e| e.to_string())?;
    ensure(report.points.len() >= 101, || format!("only {} frontier points", report.points.len()))?;
    ensure(report.checks.len() >= 50, || format!("only {} dominance checks", report.checks.len()))?;
    ensure(report.warnings.is_empty(), || report.warnings.join("; "))?;
    ensure(report.all_dominated(), || "library frontier misses an equilibrium".into())?;

    // closed-form frontier, independent of the solver
    let frontier: Vec<(f64, f64)> = (0..=100)
        .map(|k| two_agent_equilibrium(2.0, 2.0, k as f64 * 0.01).unwrap())
        .collect();
    let needed = |p: &[f64]| {
        frontier
            .iter()
            .map(|&(a, b)| (p[0] - a).max(p[1] - b).max(0.0))
            .fold(f64::INFINITY, f64::min)
    };
    let mut worst: f64 = 0.0;
    for c in &report.checks {
        worst = worst.max(needed(&c.profile));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut fresh = 0;
    for _ in 0..50 {
        let f = random_sub_budget_fgn(2, &mut rng);
        for eq in find_equilibria(&f, &costs, &tight()).map_err(|e| e.to_string())? {
            worst = worst.max(needed(&eq.profile));
            fresh += 1;
            seen.push(Encountered { contract: f.clone(), costs: costs.clone(), profile: eq.profile.to_vec() });
        }
    }
    ensure(worst <= slack, || format!("closed-form frontier needs slack {worst}"))?;
    Ok(format!(
        "{} + {fresh} equilibria dominated, largest slack used {worst:.1e} of {slack}",
        report.checks.len()
    ))
}

struct RoundTrip {
    profile: Profile,
    costs: CostModel,
    synth: luce_contracts::luce::SynthesisResult,
}

fn criterion_6(seen: &mut Vec<Encountered>, trips: &mut Vec<RoundTrip>) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut weight_err, mut budget_err): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let n = 1 + k % 5;
        let spec = random_luce_spec(n, &mut rng);
        let costs = random_power_costs(n, &mut rng);
        let f = spec.expand();
        let eqs = find_equilibria(&f, &costs, &tight()).map_err(|e| e.to_string())?;
        for eq in &eqs {
            seen.push(Encountered { contract: f.clone(), costs: costs.clone(), profile: eq.profile.to_vec() });
        }
        let p = eqs[0].profile.clone();
        let synth = synthesize_luce(&p, &costs, &SynthesisOptions::default())
            .map_err(|e| format!("#{k}: {e}"))?;
        ensure(synth.spec.tiers() == spec.tiers(), || {
            format!("#{k}: tiers {:?} vs {:?}", synth.spec.tiers(), spec.tiers())
        })?;
        let dw = synth.spec.max_weight_diff(&spec);
        let db = (synth.budget - 1.0).abs();
        weight_err = weight_err.max(dw);
        budget_err = budget_err.max(db);
        ensure(dw <= 1e-6, || format!("#{k}: weight error {dw:e}"))?;
        ensure(db <= 1e-8, || format!("#{k}: budget error {db:e}"))?;
        trips.push(RoundTrip { profile: p, costs, synth });
    }
    Ok(format!("100 specs recovered, weight error {weight_err:.1e}, budget error {budget_err:.1e}"))
}

fn criterion_7() -> Outcome {
    let p = Profile::new(vec![0.5, 0.05]).unwrap();
    let costs = CostModel::quadratic(&[2.0, 4.0]).unwrap();
    let report = luce_condition(&p, &costs).map_err(|e| e.to_string())?;
    // p c'(p) = C p^2: 0.5 and 0.01; P[1 succeeds] = 0.5, P[someone] = 1 - 0.5 * 0.95
    let (lhs_hand, rhs_hand) = (0.5 / 0.51, 0.5 / 0.525);
    ensure(!report.holds, || "condition reported as holding".into())?;
    ensure(report.worst_subset == Subset::singleton(0), || {
        format!("violated at {}, expected {{1}}", report.worst_subset)
    })?;
    ensure((report.lhs - lhs_hand).abs() <= 1e-12 && (report.rhs - rhs_hand).abs() <= 1e-12, || {
        format!("lhs {} rhs {}", report.lhs, report.rhs)
    })?;
    ensure((report.lhs - 0.9804).abs() <= 1e-4 && (report.rhs - 0.9524).abs() <= 1e-4, || {
        format!("lhs {} rhs {}", report.lhs, report.rhs)
    })?;
    match synthesize_luce(&p, &costs, &SynthesisOptions::default()) {
        Err(Error::NotLuceImplementable { subset_bits: 1, .. }) => {}
        other => return Err(format!("synthesis returned {other:?}")),
    }
    Ok(format!("rejected at {{1}}: lhs {:.4} > rhs {:.4}", report.lhs, report.rhs))
}

fn criterion_8(trips: &[RoundTrip]) -> Outcome {
    ensure(!trips.is_empty(), || "no round-trip instances".into())?;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut distinct = 0;
    for (k, t) in trips.iter().enumerate() {
        let opts = SolverOptions { seed: k as u64, ..tight() };
        match verify_uniqueness(&t.synth, &t.profile, &t.costs, 50, 1e-4, &opts) {
            Ok(r) => {
                worst = worst.min(r.worst_separation);
                distinct += r.distinct_trials;
            }
            Err(Error::UniquenessViolation { separation }) => {
                violations += 1;
                worst = worst.min(separation);
            }
            Err(e) => return Err(format!("#{k}: {e}")),
        }
    }
    ensure(violations == 0, || format!("{violations} uniqueness violations, worst separation {worst:e}"))?;
    ensure(worst > 1e-4, || format!("worst separation {worst:e}"))?;
    Ok(format!("{distinct} distinct alternatives, worst separation {worst:.1e}"))
}

fn criterion_9() -> Outcome {
    let q = Profile::new(vec![0.4, 0.4]).unwrap();
    let costs = CostModel::quadratic(&[2.0, 2.0]).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;

    let luce_contract = LuceSpec::equal_split(2).unwrap().expand();
    let luce = payment_distribution(&luce_contract, &q);
    let atoms: Vec<(f64, f64)> = luce.atoms.iter().map(|a| (a.value, a.probability)).collect();
    ensure(
        atoms.len() == 2 && close(atoms[0].0, 0.0) && close(atoms[0].1, 0.36) && close(atoms[1].0, 1.0) && close(atoms[1].1, 0.64),
        || format!("Luce atoms {atoms:?}"),
    )?;

    let piece = payment_distribution(&Contract::piece_rate(&q, &costs, true).unwrap(), &q);
    ensure(close(piece.mean, 0.64) && close(piece.variance, 0.3072), || {
        format!("piece-rate mean {} variance {}", piece.mean, piece.variance)
    })?;
    let bonus = payment_distribution(&Contract::bonus_pool(&q, &costs).unwrap(), &q);
    ensure(close(bonus.mean, 0.64) && close(bonus.variance, 2.1504), || {
        format!("bonus-pool mean {} variance {}", bonus.mean, bonus.variance)
    })?;

    for (name, d) in [("piece-rate", &piece), ("bonus-pool", &bonus)] {
        let v = mps_compare(&luce, d);
        ensure(v.sosd && v.variance_ordered && v.means_equal, || format!("{name}: {v:?}"))?;
    }
    let samples = implementing_fgn_samples(&q, &costs, 100, None, 9).map_err(|e| e.to_string())?;
    ensure(samples.len() == 100, || format!("{} samples", samples.len()))?;
    let mut min_spread = f64::INFINITY;
    for (k, g) in samples.iter().enumerate() {
        let v = mps_compare(&luce, &payment_distribution(g, &q));
        min_spread = min_spread.min(v.variance_gap);
        ensure(v.sosd && v.variance_ordered, || format!("sample #{k}: {v:?}"))?;
    }
    Ok(format!("named distributions exact; 100 samples, smallest extra variance {min_spread:.3e}"))
}

fn criterion_10(seen: &[Encountered]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, e) in seen.iter().enumerate() {
        let n = e.contract.n();
        let paid: f64 = all_subsets(n)
            .map(|s| outcome_prob(&e.profile, s) * e.contract.row(s).iter().sum::<f64>())
            .sum::<f64>()
            * e.contract.budget();
        let gap = (paid - e.costs.weighted_marginal_cost(&e.profile)).abs();
        let lib = aggregate_gap(&e.contract, &e.profile, &e.costs);
        worst = worst.max(gap).max(lib);
        ensure(gap <= 1e-8 && lib <= 1e-8, || format!("equilibrium #{k}: gap {gap:e} / {lib:e}"))?;
    }
    Ok(format!("{} equilibria, worst gap {worst:.1e}", seen.len()))
}

#[test]
fn acceptance() {
    let mut seen = Vec::new();
    let mut trips = Vec::new();
    let results = [
        ("1 two-agent closed form", criterion_1()),
        ("2 symmetric weight gives 1/2", criterion_2()),
        ("3 corner thresholds", criterion_3()),
        ("4 SGE contracts have z = 1", criterion_4(&mut seen)),
        ("5 SGE frontier dominates", criterion_5(&mut seen)),
        ("6 Luce round-trip", criterion_6(&mut seen, &mut trips)),
        ("7 implementability boundary", criterion_7()),
        ("8 uniqueness", criterion_8(&trips)),
        ("9 payment distributions", criterion_9()),
        ("10 aggregate identity", criterion_10(&seen)),
    ];
    let mut failed = Vec::new();
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(why) => {
                println!("FAIL {name}: {why}");
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
