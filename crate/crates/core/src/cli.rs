//! The `luce` command line.
//!
//! Every subcommand prints JSON objects, one per line, or CSV with a header
//! row. Agent ids are 1-based and floats carry 12 significant digits.
//! Exit codes: 0 success, 2 invalid input, 3 profile not implementable by
//! a Luce contract, 4 solver did not converge.

use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::equilibrium::{find_equilibria, SolverOptions};
use crate::error::{Error, Result};
use crate::io::{format_sig, round_sig};
use crate::luce::{synthesize_luce, SynthesisOptions};
use crate::maximal::{brute_force_frontier, implementability_necessary, luce_condition, z_value};
use crate::model::{Contract, CostFn, CostModel, Profile};
use crate::optimize::{
    optimize_principal, two_agent_equilibrium, two_agent_optimal_lambda, two_agent_thresholds,
    Objective, OptimizeOptions,
};
use crate::payments::{implementing_fgn_samples, mps_compare, payment_distribution, PaymentDistribution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_LUCE: i32 = 3;
pub const EXIT_NO_CONVERGENCE: i32 = 4;

/// Tolerance for `z(p) = 1` in `check`.
const Z_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "luce", version, about = "Equilibria and Luce contracts for multi-agent effort games")]
struct Cli {
    /// JSON problem file; its values win over conflicting flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Default)]
struct ProblemArgs {
    /// Cost functions, e.g. `power:2:2,power:4:2` (scale, exponent).
    #[arg(long, value_delimiter = ',')]
    costs: Option<Vec<String>>,
    /// Budget (default 1).
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Debug, Args, Default)]
struct ProfileArgs {
    /// Comma-separated success probabilities; repeat for batch mode.
    #[arg(long = "profile")]
    profiles: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibria of the contract in a JSON file.
    Solve {
        #[arg(long)]
        contract: PathBuf,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// z value, maximality and the Luce condition for profiles.
    Check {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Luce contract and budget implementing each profile.
    Synthesize {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Best Luce contract for a linear objective.
    Optimize {
        /// Objective weights, one per agent.
        #[arg(long, value_delimiter = ',')]
        objective: Option<Vec<f64>>,
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// Closed-form two-agent quadratic case.
    TwoAgent {
        /// Cost of agent 1 is `c1 p^2 / 2`.
        #[arg(long)]
        c1: f64,
        /// Cost of agent 2 is `c2 p^2 / 2`.
        #[arg(long)]
        c2: f64,
        /// Weight on agent 1 in `w p_1 + p_2`.
        #[arg(long)]
        w: Option<f64>,
        /// CSV sweep `FROM:TO:COUNT` over w instead of a single value.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Total-payment distributions and spread comparisons at a profile.
    Payments {
        #[command(flatten)]
        profile: ProfileArgs,
        #[command(flatten)]
        problem: ProblemArgs,
        /// Number of sampled implementing contracts.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Print the distribution tables as CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Sampled SGE frontier as CSV (at most 3 agents).
    Frontier {
        /// Grid steps per share parameter.
        #[arg(long, default_value_t = 100)]
        grid: usize,
        /// Random sub-budget contracts checked for dominance.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[command(flatten)]
        problem: ProblemArgs,
    },
}

/// Problem file schema.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: Option<usize>,
    #[serde(default)]
    pub costs: Option<Vec<CostFn>>,
    pub budget: Option<f64>,
    pub objective: Option<ObjectiveConfig>,
    pub solver: Option<SolverOptions>,
    #[serde(default)]
    pub profiles: Option<Vec<Vec<f64>>>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveConfig {
    Linear { weights: Vec<f64> },
}

impl ProblemConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ProblemConfig = serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
        if let (Some(n), Some(costs)) = (cfg.n, &cfg.costs) {
            if costs.len() != n {
                return Err(Error::invalid(format!(
                    "config declares n = {n} but lists {} cost functions",
                    costs.len()
                )));
            }
        }
        if let Some(costs) = &cfg.costs {
            let model = CostModel::new(costs.clone())?;
            model
                .normalize_budget(cfg.budget.unwrap_or(1.0))?
                .check_small_budget()?;
        }
        Ok(cfg)
    }
}

/// Parses `power:SCALE:EXPONENT`.
pub fn parse_cost(text: &str) -> Result<CostFn> {
    let parts: Vec<&str> = text.trim().split(':').collect();
    match parts.as_slice() {
        ["power", scale, exponent] => {
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad number {s:?} in cost {text:?}")))
            };
            CostFn::power(num(scale)?, num(exponent)?)
        }
        _ => Err(Error::invalid(format!(
            "cost {text:?} is not of the form power:SCALE:EXPONENT"
        ))),
    }
}

pub fn parse_profile(text: &str) -> Result<Profile> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad probability {s:?} in profile {text:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Profile::new(values)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotLuceImplementable { .. } | Error::InconsistentTightSets { .. } => EXIT_NOT_LUCE,
        Error::NoConvergence { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_INVALID,
    }
}

/// Rounds every float in `v` to 12 significant digits.
fn rounded(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_sig(x)))
            .map_or(Value::Null, Value::Number),
        Value::Array(a) => Value::Array(a.into_iter().map(rounded).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

/// Collected output plus the exit status to report after printing it.
struct Output {
    text: String,
    code: i32,
}

impl Output {
    fn new() -> Self {
        Output { text: String::new(), code: EXIT_OK }
    }

    fn json(&mut self, v: Value) {
        self.text += &serde_json::to_string(&rounded(v)).expect("JSON values serialize");
        self.text.push('\n');
    }
}

struct Context {
    config: ProblemConfig,
    seed: Option<u64>,
}

impl Context {
    fn warn_conflict(&self, what: &str) {
        eprintln!("warning: {what} given both in the config file and on the command line; using the config file");
    }

    fn costs(&self, problem: &ProblemArgs) -> Result<CostModel> {
        let from_flags = problem
            .costs
            .as_ref()
            .map(|list| list.iter().map(|s| parse_cost(s)).collect::<Result<Vec<_>>>())
            .transpose()?;
        let agents = match (&self.config.costs, from_flags) {
            (Some(cfg), flags) => {
                if flags.is_some_and(|f| &f != cfg) {
                    self.warn_conflict("costs");
                }
                cfg.clone()
            }
            (None, Some(f)) => f,
            (None, None) => return Err(Error::invalid("no cost functions given (use --costs or a config file)")),
        };
        let model = CostModel::new(agents)?;
        if let Some(n) = self.config.n {
            if n != model.n() {
                return Err(Error::invalid(format!(
                    "config declares n = {n} but {} cost functions were given",
                    model.n()
                )));
            }
        }
        Ok(model)
    }

    fn budget(&self, problem: &ProblemArgs) -> f64 {
        match (self.config.budget, problem.budget) {
            (Some(b), flag) => {
                if flag.is_some_and(|f| f != b) {
                    self.warn_conflict("budget");
                }
                b
            }
            (None, flag) => flag.unwrap_or(1.0),
        }
    }

    /// Costs checked for small-budget admissibility under the budget.
    fn admissible_costs(&self, problem: &ProblemArgs) -> Result<(CostModel, f64)> {
        let costs = self.costs(problem)?;
        let budget = self.budget(problem);
        let unit = costs.normalize_budget(budget)?;
        unit.check_small_budget()?;
        Ok((costs, budget))
    }

    fn profiles(&self, args: &ProfileArgs, n: usize) -> Result<Vec<Profile>> {
        let list = match &self.config.profiles {
            Some(cfg) => {
                if !args.profiles.is_empty() {
                    self.warn_conflict("profiles");
                }
                cfg.iter().map(|p| Profile::new(p.clone())).collect::<Result<Vec<_>>>()?
            }
            None => args.profiles.iter().map(|s| parse_profile(s)).collect::<Result<Vec<_>>>()?,
        };
        if list.is_empty() {
            return Err(Error::invalid("no profile given (use --profile or a config file)"));
        }
        if let Some(p) = list.iter().find(|p| p.len() != n) {
            return Err(Error::invalid(format!(
                "profile {:?} has {} entries for {n} agents",
                &**p,
                p.len()
            )));
        }
        Ok(list)
    }

    fn solver(&self) -> SolverOptions {
        let mut opts = self.config.solver.clone().unwrap_or_default();
        if self.config.solver.is_none() {
            if let Some(seed) = self.seed {
                opts.seed = seed;
            }
        } else if self.seed.is_some_and(|s| s != opts.seed) {
            self.warn_conflict("seed");
        }
        opts
    }

    fn seed(&self) -> u64 {
        self.solver().seed
    }
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let config = match &cli.config {
        Some(path) => ProblemConfig::load(path)?,
        None => ProblemConfig::default(),
    };
    let out_path = match (&config.out, &cli.out) {
        (Some(c), Some(f)) if c != f => {
            eprintln!("warning: out given both in the config file and on the command line; using the config file");
            Some(c.clone())
        }
        (Some(c), _) => Some(c.clone()),
        (None, f) => f.clone(),
    };
    let ctx = Context { config, seed: cli.seed };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::invalid("--threads must be positive"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::invalid(format!("cannot start thread pool: {e}")))?;
    let mut out = Output::new();
    let result = pool.install(|| dispatch(&ctx, &cli.command, &mut out));
    // partial output is still written before reporting an error
    match &out_path {
        Some(path) => fs::write(path, &out.text)
            .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.text.as_bytes());
            let _ = stdout.flush();
        }
    }
    result.map(|()| out.code)
}

fn dispatch(ctx: &Context, command: &Command, out: &mut Output) -> Result<()> {
    match command {
        Command::Solve { contract, problem } => solve(ctx, contract, problem, out),
        Command::Check { profile, problem } => check(ctx, profile, problem, out),
        Command::Synthesize { profile, problem } => synthesize(ctx, profile, problem, out),
        Command::Optimize { objective, problem } => optimize(ctx, objective.as_deref(), problem, out),
        Command::TwoAgent { c1, c2, w, sweep } => two_agent(*c1, *c2, *w, sweep.as_deref(), out),
        Command::Payments { profile, problem, samples, csv } => {
            payments(ctx, profile, problem, *samples, *csv, out)
        }
        Command::Frontier { grid, samples, problem } => frontier(ctx, *grid, *samples, problem, out),
    }
}

fn solve(ctx: &Context, path: &PathBuf, problem: &ProblemArgs, out: &mut Output) -> Result<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read contract {}: {e}", path.display())))?;
    let f: Contract = serde_json::from_str(&text)
        .map_err(|e| Error::invalid(format!("contract {}: {e}", path.display())))?;
    let costs = ctx.costs(problem)?;
    if !f.is_unconstrained() {
        costs.normalize_budget(f.budget())?.check_small_budget()?;
    }
    let eqs = find_equilibria(&f, &costs, &ctx.solver())?;
    let list: Vec<Value> = eqs
        .iter()
        .map(|r| {
            json!({
                "profile": to_value(&r.profile),
                "max_residual": r.max_residual,
                "iterations": r.iterations,
                "converged": r.converged,
                "z": z_value(&r.profile, &costs.normalize_budget(f.budget()).expect("budget validated")),
            })
        })
        .collect();
    out.json(json!({ "equilibria": list }));
    Ok(())
}

fn check(ctx: &Context, args: &ProfileArgs, problem: &ProblemArgs, out: &mut Output) -> Result<()> {
    let (costs, budget) = ctx.admissible_costs(problem)?;
    let unit = costs.normalize_budget(budget)?;
    for p in ctx.profiles(args, costs.n())? {
        let report = luce_condition(&p, &unit)?;
        let z = z_value(&p, &unit);
        let maximal = (z - 1.0).abs() <= Z_TOL && report.holds;
        if !report.holds {
            out.code = EXIT_NOT_LUCE;
        }
        out.json(json!({
            "profile": to_value(&p),
            "z": z,
            "implementable_necessary": implementability_necessary(&p, &unit, Z_TOL),
            "maximal_candidate": maximal,
            "condition": to_value(&report),
        }));
    }
    Ok(())
}

fn synthesize(ctx: &Context, args: &ProfileArgs, problem: &ProblemArgs, out: &mut Output) -> Result<()> {
    let (costs, budget) = ctx.admissible_costs(problem)?;
    let unit = costs.normalize_budget(budget)?;
    for p in ctx.profiles(args, costs.n())? {
        let r = synthesize_luce(&p, &unit, &SynthesisOptions::default())?;
        let spec = to_value(&r.spec);
        out.json(json!({
            "profile": to_value(&p),
            "partition": spec["partition"],
            "weights": spec["weights"],
            "budget": r.budget * budget,
            "residual": r.residual,
            "tight_chain": to_value(&r.tight_chain),
        }));
    }
    Ok(())
}

fn optimize(ctx: &Context, flag: Option<&[f64]>, problem: &ProblemArgs, out: &mut Output) -> Result<()> {
    let (costs, budget) = ctx.admissible_costs(problem)?;
    let weights = match (&ctx.config.objective, flag) {
        (Some(ObjectiveConfig::Linear { weights }), f) => {
            if f.is_some_and(|f| f != weights.as_slice()) {
                ctx.warn_conflict("objective");
            }
            weights.clone()
        }
        (None, Some(f)) => f.to_vec(),
        (None, None) => vec![1.0; costs.n()],
    };
    let opts = OptimizeOptions {
        solver: SolverOptions {
            seed: ctx.seed(),
            ..OptimizeOptions::default().solver
        },
        ..OptimizeOptions::default()
    };
    let best = optimize_principal(&Objective::linear(weights)?, &costs.normalize_budget(budget)?, &opts)?;
    for w in &best.warnings {
        eprintln!("warning: {w}");
    }
    let spec = to_value(&best.spec);
    out.json(json!({
        "partition": spec["partition"],
        "weights": spec["weights"],
        "budget": budget,
        "equilibrium": to_value(&best.equilibrium),
        "value": best.value,
        "search_trace": best.search_trace,
        "warnings": best.warnings,
    }));
    Ok(())
}

fn two_agent(c1: f64, c2: f64, w: Option<f64>, sweep: Option<&str>, out: &mut Output) -> Result<()> {
    let (lower, upper) = two_agent_thresholds(c1, c2)?;
    match (w, sweep) {
        (Some(w), None) => {
            let lambda = two_agent_optimal_lambda(c1, c2, w)?;
            let (p1, p2) = two_agent_equilibrium(c1, c2, lambda)?;
            out.json(json!({
                "lambda": lambda,
                "profile": [p1, p2],
                "value": w * p1 + p2,
                "thresholds": [lower, upper],
            }));
        }
        (None, Some(spec)) => {
            let parts: Vec<&str> = spec.split(':').collect();
            let bad = || Error::invalid(format!("sweep {spec:?} is not FROM:TO:COUNT"));
            let [from, to, count] = parts.as_slice() else {
                return Err(bad());
            };
            let from: f64 = from.parse().map_err(|_| bad())?;
            let to: f64 = to.parse().map_err(|_| bad())?;
            let count: usize = count.parse().map_err(|_| bad())?;
            if count < 2 {
                return Err(Error::invalid("sweep needs at least 2 points"));
            }
            out.text += "w,lambda,p1,p2\n";
            for k in 0..count {
                let w = from + (to - from) * k as f64 / (count - 1) as f64;
                let lambda = two_agent_optimal_lambda(c1, c2, w)?;
                let (p1, p2) = two_agent_equilibrium(c1, c2, lambda)?;
                out.text += &[w, lambda, p1, p2].map(format_sig).join(",");
                out.text.push('\n');
            }
        }
        _ => return Err(Error::invalid("two-agent needs exactly one of --w and --sweep")),
    }
    Ok(())
}

fn payments(
    ctx: &Context,
    args: &ProfileArgs,
    problem: &ProblemArgs,
    samples: usize,
    csv: bool,
    out: &mut Output,
) -> Result<()> {
    let (costs, budget) = ctx.admissible_costs(problem)?;
    let unit = costs.normalize_budget(budget)?;
    if csv {
        out.text += "contract,value,probability\n";
    }
    for q in ctx.profiles(args, costs.n())? {
        let synth = synthesize_luce(&q, &unit, &SynthesisOptions::default())?;
        let luce = payment_distribution(&synth.spec.expand_with_budget(synth.budget)?, &q);
        let named: Vec<(&str, PaymentDistribution)> = vec![
            ("piece_rate", payment_distribution(&Contract::piece_rate(&q, &unit, true)?, &q)),
            ("bonus_pool", payment_distribution(&Contract::bonus_pool(&q, &unit)?, &q)),
        ];
        // payments are in units of the unit-budget game; scale back to the real budget
        let scaled = |d: &PaymentDistribution| {
            PaymentDistribution::from_points(d.atoms.iter().map(|a| (a.value * budget, a.probability)).collect())
        };
        if csv {
            for (name, d) in std::iter::once(("luce", &luce)).chain(named.iter().map(|(n, d)| (*n, d))) {
                for a in scaled(d).atoms {
                    out.text += &format!("{name},{},{}\n", format_sig(a.value), format_sig(a.probability));
                }
            }
            continue;
        }
        let mut doc = json!({
            "profile": to_value(&q),
            "luce": {
                "partition": to_value(&synth.spec)["partition"],
                "weights": to_value(&synth.spec)["weights"],
                "budget": synth.budget * budget,
                "distribution": to_value(&scaled(&luce)),
            },
        });
        for (name, d) in &named {
            doc[*name] = json!({
                "distribution": to_value(&scaled(d)),
                "verdict": to_value(&mps_compare(&luce, d)),
            });
        }
        let sampled = implementing_fgn_samples(&q, &unit, samples, None, ctx.seed())?;
        let verdicts: Vec<_> = sampled
            .iter()
            .map(|f| mps_compare(&luce, &payment_distribution(f, &q)))
            .collect();
        doc["samples"] = json!({
            "count": verdicts.len(),
            "all_pass": verdicts.iter().all(|v| v.all()),
            "min_variance_gap": verdicts.iter().map(|v| v.variance_gap * budget * budget).fold(f64::INFINITY, f64::min),
            "min_sosd_gap": verdicts.iter().map(|v| v.sosd_gap * budget).fold(f64::INFINITY, f64::min),
        });
        out.json(doc);
    }
    Ok(())
}

fn frontier(ctx: &Context, grid: usize, samples: usize, problem: &ProblemArgs, out: &mut Output) -> Result<()> {
    let (costs, budget) = ctx.admissible_costs(problem)?;
    let report = brute_force_frontier(&costs.normalize_budget(budget)?, grid, samples, &ctx.solver())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    out.text += &report.to_csv()?;
    let undominated = report.checks.iter().filter(|c| !c.dominated).count();
    eprintln!(
        "frontier: {} points, {} sampled equilibria, {} not dominated within slack {}",
        report.points.len(),
        report.checks.len(),
        undominated,
        format_sig(report.slack)
    );
    Ok(())
}
