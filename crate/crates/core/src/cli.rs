//! The `ssp` command line: one subcommand per problem kind plus `bench`,
//! which runs a named synthetic experiment over many seeds in parallel.
//!
//! Exit codes: 0 when the stopping tolerance is met, 2 when the epoch or
//! time budget runs out, 1 on configuration, parse or usage errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::builders::{
    build_lp_feasibility, build_robust_svm, build_sparse_svm_lp, covariance_from_data, ordinary_errors,
    planted_gaussian_system, random_bounded_lp, worst_case_errors, CovarianceMode, EllipsoidModel, LabeledDataset,
    WorstCaseTest,
};
use crate::error::{Result, SspError};
use crate::io::{read_libsvm, read_matrix_market, read_vector, suffixed_path, LabelMap, Report};
use crate::linalg::{dot, Matrix};
use crate::ls::{ssp_ls_run, LinearFeasibilityProblem, LsConfig, LsReport};
use crate::problem::{AffineConstraints, CompositeProblem, ZeroObjective};
use crate::prox::SimpleSet;
use crate::rng::{Categorical, RandomStream};
use crate::ssp::{ssp_run, SolveReport, SolverConfig, Termination};
use crate::stepsize::{StepsizeParams, StepsizeRegistry};
use crate::trace::ConvergenceTrace;

#[derive(Parser, Debug)]
#[command(name = "ssp", version, about = "Stochastic subgradient projection solvers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Linear feasibility `Ax = b, Cx ≤ d, x ∈ Y` with the adaptive solver.
    Ls(LsArgs),
    /// `min cᵀz s.t. Cz ≤ d, z ≥ 0` through its primal-dual system.
    Lp(LpArgs),
    /// Sparse linear SVM, solved as an LP.
    Svm(SvmArgs),
    /// Sparse SVM robust to ellipsoidal feature uncertainty.
    RobustSvm(RobustSvmArgs),
    /// Affine feasibility with the general solver and a zero objective.
    Feasibility(FeasibilityArgs),
    /// Multi-seed sweep of a named synthetic experiment.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone)]
pub struct OutputArgs {
    /// Trace CSV path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Report path (`key = value` lines).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Logging and checkpoint interval, in epochs.
    #[arg(long, default_value_t = 1)]
    pub log_every: usize,
}

#[derive(Args, Debug, Clone)]
pub struct LsSolverArgs {
    #[arg(long, default_value_t = 1.96)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.96)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Equality rows per sampled block.
    #[arg(long, default_value_t = 1)]
    pub block_size: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Policy {
    Poly,
    Switch,
    Const,
}

impl Policy {
    fn name(self) -> &'static str {
        match self {
            Policy::Poly => "poly",
            Policy::Switch => "switch",
            Policy::Const => "const",
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SspArgs {
    #[arg(long, default_value_t = 1.96)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = Policy::Poly)]
    pub policy: Policy,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 500)]
    pub max_epochs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SetKind {
    Free,
    Nonneg,
}

#[derive(Args, Debug)]
pub struct LsArgs {
    #[arg(long = "A")]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long = "C")]
    pub c: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<PathBuf>,
    /// Simple set `Y`.
    #[arg(long, value_enum, default_value_t = SetKind::Free)]
    pub y: SetKind,
    #[command(flatten)]
    pub solver: LsSolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct LpArgs {
    #[arg(long = "C")]
    pub c: PathBuf,
    #[arg(long)]
    pub d: PathBuf,
    /// Cost vector `c`.
    #[arg(long)]
    pub cost: PathBuf,
    #[command(flatten)]
    pub solver: LsSolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LabelArg {
    /// Labels are ±1.
    Signed,
    /// Labels are 0/1.
    ZeroOne,
}

impl From<LabelArg> for LabelMap {
    fn from(l: LabelArg) -> Self {
        match l {
            LabelArg::Signed => LabelMap::Signed,
            LabelArg::ZeroOne => LabelMap::ZeroOne,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// LIBSVM file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = LabelArg::Signed)]
    pub labels: LabelArg,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Train on a seeded fraction and also report test errors.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SvmArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: LsSolverArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CovModeArg {
    Dependent,
    Independent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WorstCaseArg {
    Squared,
    Unsquared,
}

#[derive(Args, Debug)]
pub struct RobustSvmArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.3)]
    pub rho: f64,
    #[arg(long, value_enum, default_value_t = CovModeArg::Dependent)]
    pub cov_mode: CovModeArg,
    /// Noise level for counting worst-case errors; defaults to `--rho`.
    #[arg(long)]
    pub eval_rho: Option<f64>,
    #[arg(long, value_enum, default_value_t = WorstCaseArg::Squared)]
    pub worst_case_test: WorstCaseArg,
    #[command(flatten)]
    pub solver: SspArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug)]
pub struct FeasibilityArgs {
    #[arg(long = "A")]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    #[arg(long = "C")]
    pub c: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SetKind::Free)]
    pub y: SetKind,
    #[command(flatten)]
    pub solver: SspArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone)]
pub struct BenchArgs {
    /// Experiment name; `--list` shows the registry.
    #[arg(long, default_value = "ls-gaussian")]
    pub experiment: String,
    #[arg(long)]
    pub list: bool,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 100)]
    pub p: usize,
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 1.96)]
    pub delta: f64,
    #[arg(long, default_value_t = 1.96)]
    pub beta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 2000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    /// Per-seed traces go to this path with `_s<seed>` before the extension.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

/// Result of one solve as seen by the CLI.
pub struct RunOutcome {
    pub report: Report,
    pub trace: ConvergenceTrace,
    pub termination: Termination,
}

impl RunOutcome {
    fn exit_code(&self) -> i32 {
        match self.termination {
            Termination::ToleranceMet => 0,
            _ => 2,
        }
    }
}

/// Parses `argv` (program name first), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(command: &Command) -> Result<i32> {
    let outcome = match command {
        Command::Ls(a) => run_ls(a)?,
        Command::Lp(a) => run_lp(a)?,
        Command::Svm(a) => run_svm(a)?,
        Command::RobustSvm(a) => run_robust_svm(a)?,
        Command::Feasibility(a) => run_feasibility(a)?,
        Command::Bench(a) => return run_bench(a),
    };
    let output = match command {
        Command::Ls(a) => &a.output,
        Command::Lp(a) => &a.output,
        Command::Svm(a) => &a.output,
        Command::RobustSvm(a) => &a.output,
        Command::Feasibility(a) => &a.output,
        Command::Bench(_) => unreachable!(),
    };
    emit(&outcome, output.trace.as_deref(), output.report.as_deref())?;
    Ok(outcome.exit_code())
}

fn emit(outcome: &RunOutcome, trace: Option<&Path>, report: Option<&Path>) -> Result<()> {
    if let Some(p) = trace {
        outcome.trace.write_csv(p)?;
    }
    if let Some(p) = report {
        outcome.report.write(p)?;
    }
    print!("{}", outcome.report.render());
    Ok(())
}

fn paired(m: &Option<PathBuf>, v: &Option<PathBuf>, names: &str) -> Result<Option<(Matrix, Vec<f64>)>> {
    match (m, v) {
        (Some(m), Some(v)) => Ok(Some((read_matrix_market(m)?, read_vector(v)?))),
        (None, None) => Ok(None),
        _ => Err(SspError::config(format!("{names} must be given together"))),
    }
}

fn simple_set(kind: SetKind) -> SimpleSet {
    match kind {
        SetKind::Free => SimpleSet::WholeSpace,
        SetKind::Nonneg => SimpleSet::NonnegativeOrthant,
    }
}

fn ls_config(s: &LsSolverArgs, log_every: usize) -> LsConfig {
    LsConfig {
        delta: s.delta,
        beta: s.beta,
        tolerance: s.tol,
        max_epochs: s.max_epochs,
        seed: s.seed,
        x0: None,
        log_every,
    }
}

fn ls_report(rep: &LsReport) -> Report {
    let mut r = Report::new();
    r.push("status", rep.termination)
        .push("epochs", rep.epochs)
        .push("iterations", rep.iterations)
        .push("eq_residual", rep.eq_residual)
        .push("ineq_residual", rep.ineq_residual);
    r
}

fn run_ls(args: &LsArgs) -> Result<RunOutcome> {
    let eq = paired(&args.a, &args.b, "--A and --b")?;
    let ineq = paired(&args.c, &args.d, "--C and --d")?;
    let n = match (&eq, &ineq) {
        (Some((a, _)), _) => a.ncols(),
        (None, Some((c, _))) => c.ncols(),
        (None, None) => return Err(SspError::config("need --A/--b, --C/--d or both")),
    };
    let (a, b) = eq.unwrap_or_else(|| (Matrix::zeros(0, n), vec![]));
    let (c, d) = ineq.unwrap_or_else(|| (Matrix::zeros(0, n), vec![]));
    let problem = LinearFeasibilityProblem::new(a, b, c, d, simple_set(args.y), args.solver.block_size)?;
    let (rep, trace) = ssp_ls_run(&problem, &ls_config(&args.solver, args.output.log_every))?;
    let mut report = ls_report(&rep);
    report
        .push("obj_est", "na")
        .push("nnz_w", "na")
        .push("ordinary_errors_train", "na")
        .push("worst_case_errors_train", "na");
    Ok(RunOutcome {
        report,
        trace,
        termination: rep.termination,
    })
}

fn run_lp(args: &LpArgs) -> Result<RunOutcome> {
    let c_lp = read_matrix_market(&args.c)?;
    let d_lp = read_vector(&args.d)?;
    let cost = read_vector(&args.cost)?;
    let problem = build_lp_feasibility(&cost, &c_lp, &d_lp)?;
    let (rep, trace) = ssp_ls_run(&problem, &ls_config(&args.solver, args.output.log_every))?;
    let mut report = ls_report(&rep);
    report
        .push("obj_est", dot(&cost, &rep.point[..cost.len()]))
        .push("nnz_w", "na")
        .push("ordinary_errors_train", "na")
        .push("worst_case_errors_train", "na");
    Ok(RunOutcome {
        report,
        trace,
        termination: rep.termination,
    })
}

fn load_split(args: &DataArgs, seed: u64) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
    let data = read_libsvm(&args.data, args.labels.into())?;
    match args.train_fraction {
        Some(f) if !(f > 0.0 && f < 1.0) => Err(SspError::config("train fraction must lie in (0, 1)")),
        Some(f) => {
            let (train, test) = data.split_train_test(f, seed);
            Ok((train, Some(test)))
        }
        None => Ok((data, None)),
    }
}

fn nnz(w: &[f64]) -> usize {
    w.iter().filter(|v| v.abs() > 1e-8).count()
}

fn run_svm(args: &SvmArgs) -> Result<RunOutcome> {
    let (train, test) = load_split(&args.data, args.solver.seed)?;
    let (problem, layout) = build_sparse_svm_lp(&train, args.data.lambda)?;
    let (rep, trace) = ssp_ls_run(&problem, &ls_config(&args.solver, args.output.log_every))?;
    let (w, d, u) = layout.decode(&rep.point);
    let obj = w.iter().map(|v| v.abs()).sum::<f64>() + args.data.lambda * u.iter().sum::<f64>();
    let mut report = ls_report(&rep);
    report
        .push("obj_est", obj)
        .push("nnz_w", nnz(&w))
        .push("ordinary_errors_train", ordinary_errors(&w, d, &train))
        .push("worst_case_errors_train", "na");
    if let Some(test) = test {
        report.push("ordinary_errors_test", ordinary_errors(&w, d, &test));
    }
    Ok(RunOutcome {
        report,
        trace,
        termination: rep.termination,
    })
}

fn ssp_config(
    s: &SspArgs,
    problem: &CompositeProblem,
    default_tol: Option<f64>,
    log_every: usize,
) -> Result<SolverConfig> {
    let registry = StepsizeRegistry::with_builtins();
    let params = StepsizeParams {
        alpha0: s.alpha0,
        gamma: s.gamma,
        l: s.l.or(problem.constants().map(|c| c.l)),
        mu: s.mu,
    };
    let rule = registry.build(s.policy.name(), &params)?;
    let total = problem.objective_sampler().len().unwrap_or(1)
        + problem.constraints().and_then(|c| c.sampler.len()).unwrap_or(0);
    let per_iter = 1 + usize::from(problem.constraints().is_some());
    let per_epoch = total.div_ceil(per_iter).max(1);
    let mut cfg = SolverConfig::new(rule);
    cfg.beta = s.beta;
    cfg.seed = s.seed;
    cfg.tolerance = s.tol.or(default_tol);
    cfg.max_iterations = s.max_epochs.saturating_mul(per_epoch);
    cfg.log_every = log_every.saturating_mul(per_epoch).max(1);
    Ok(cfg)
}

fn ssp_report(rep: &SolveReport) -> Report {
    let mut r = Report::new();
    r.push("status", rep.termination)
        .push("epochs", rep.epochs)
        .push("iterations", rep.iterations)
        .push("eq_residual", "na")
        .push("ineq_residual", rep.feas_residual)
        .push("obj_est", rep.obj_est.map_or("na".to_string(), |v| v.to_string()));
    r
}

fn ellipsoids(data: &LabeledDataset, mode: CovModeArg, rho: f64) -> Result<EllipsoidModel> {
    if rho == 0.0 {
        let n = data.n_features();
        return EllipsoidModel::new(CovarianceMode::ClassIndependent, vec![0.0; n], vec![0.0; n], 0.0);
    }
    let mode = match mode {
        CovModeArg::Dependent => CovarianceMode::ClassDependent,
        CovModeArg::Independent => CovarianceMode::ClassIndependent,
    };
    covariance_from_data(data, mode, rho)
}

fn run_robust_svm(args: &RobustSvmArgs) -> Result<RunOutcome> {
    let (train, test) = load_split(&args.data, args.solver.seed)?;
    let model = ellipsoids(&train, args.cov_mode, args.rho)?;
    let (problem, layout) = build_robust_svm(&train, args.data.lambda, &model)?;
    let cfg = ssp_config(&args.solver, &problem, Some(1e-2), args.output.log_every)?;
    let (rep, trace) = ssp_run(&problem, &cfg)?;
    let (w, d, _) = layout.split(&rep.point);
    let eval_model = match args.eval_rho {
        Some(r) => ellipsoids(&train, args.cov_mode, r)?,
        None => model,
    };
    let test_kind = match args.worst_case_test {
        WorstCaseArg::Squared => WorstCaseTest::Squared,
        WorstCaseArg::Unsquared => WorstCaseTest::Unsquared,
    };
    let mut report = ssp_report(&rep);
    report
        .push("nnz_w", nnz(w))
        .push("ordinary_errors_train", ordinary_errors(w, d, &train))
        .push(
            "worst_case_errors_train",
            worst_case_errors(w, d, &train, &eval_model, test_kind)?,
        );
    if let Some(test) = test {
        report.push("ordinary_errors_test", ordinary_errors(w, d, &test));
    }
    Ok(RunOutcome {
        report,
        trace,
        termination: rep.termination,
    })
}

fn run_feasibility(args: &FeasibilityArgs) -> Result<RunOutcome> {
    let eq = paired(&args.a, &args.b, "--A and --b")?;
    let ineq = paired(&args.c, &args.d, "--C and --d")?;
    // equalities enter as two opposite inequalities
    let mut trip = Vec::new();
    let mut rhs = Vec::new();
    let mut n = None;
    if let Some((c, d)) = &ineq {
        n = Some(c.ncols());
        trip.extend(c.triplets());
        rhs.extend_from_slice(d);
    }
    if let Some((a, b)) = &eq {
        if n.is_some_and(|n| n != a.ncols()) {
            return Err(SspError::dimension("A and C differ in column count"));
        }
        n = Some(a.ncols());
        for sign in [1.0, -1.0] {
            let off = rhs.len();
            trip.extend(a.triplets().into_iter().map(|(i, j, v)| (off + i, j, sign * v)));
            rhs.extend(b.iter().map(|v| sign * v));
        }
    }
    let n = n.ok_or_else(|| SspError::config("need --A/--b, --C/--d or both"))?;
    let c = Matrix::from_triplets(rhs.len(), n, &trip)?;
    let weights: Vec<f64> = (0..c.nrows()).map(|i| c.row(i).norm_sq()).collect();
    let family = AffineConstraints::new(c, rhs)?;
    let problem = CompositeProblem::new(
        Arc::new(ZeroObjective { dimension: n }),
        Arc::new(Categorical::uniform(1)?),
        simple_set(args.y),
    )?
    .with_constraints(Arc::new(family), Arc::new(Categorical::from_weights(&weights)?))?;
    let cfg = ssp_config(&args.solver, &problem, Some(1e-3), args.output.log_every)?;
    let (rep, trace) = ssp_run(&problem, &cfg)?;
    let mut report = ssp_report(&rep);
    report
        .push("nnz_w", "na")
        .push("ordinary_errors_train", "na")
        .push("worst_case_errors_train", "na");
    Ok(RunOutcome {
        report,
        trace,
        termination: rep.termination,
    })
}

/// A synthetic experiment runnable by `bench`, one seed at a time.
pub trait Experiment: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn run(&self, args: &BenchArgs, seed: u64) -> Result<RunOutcome>;
}

/// Planted Gaussian system of size `m × n` equalities and `p × n` inequalities.
struct LsGaussian;

impl Experiment for LsGaussian {
    fn name(&self) -> &'static str {
        "ls-gaussian"
    }

    fn description(&self) -> &'static str {
        "consistent Gaussian system with a planted solution (--m --p --n)"
    }

    fn run(&self, args: &BenchArgs, seed: u64) -> Result<RunOutcome> {
        let sys = planted_gaussian_system(args.m, args.p, args.n, seed);
        let problem = LinearFeasibilityProblem::new(sys.a, sys.b, sys.c, sys.d, SimpleSet::WholeSpace, 1)?;
        let cfg = LsConfig {
            delta: args.delta,
            beta: args.beta,
            tolerance: args.tol,
            max_epochs: args.max_epochs,
            seed,
            x0: None,
            log_every: args.max_epochs.max(1),
        };
        let (rep, trace) = ssp_ls_run(&problem, &cfg)?;
        Ok(RunOutcome {
            report: ls_report(&rep),
            trace,
            termination: rep.termination,
        })
    }
}

/// Random bounded LP with `--n` variables and `--p` rows, via its primal-dual system.
struct LpRandom;

impl Experiment for LpRandom {
    fn name(&self) -> &'static str {
        "lp-random"
    }

    fn description(&self) -> &'static str {
        "random bounded LP through its primal-dual system (--n --p)"
    }

    fn run(&self, args: &BenchArgs, seed: u64) -> Result<RunOutcome> {
        let (cost, c, d) = random_bounded_lp(args.n, args.p, seed);
        let problem = build_lp_feasibility(&cost, &c, &d)?;
        let cfg = LsConfig {
            delta: args.delta,
            beta: args.beta,
            tolerance: args.tol,
            max_epochs: args.max_epochs,
            seed,
            x0: None,
            log_every: args.max_epochs.max(1),
        };
        let (rep, trace) = ssp_ls_run(&problem, &cfg)?;
        let mut report = ls_report(&rep);
        report.push("obj_est", dot(&cost, &rep.point[..cost.len()]));
        Ok(RunOutcome {
            report,
            trace,
            termination: rep.termination,
        })
    }
}

/// Two Gaussian clouds in `--n` dimensions, `--m` examples, solved as an LP.
struct SvmGaussian;

impl Experiment for SvmGaussian {
    fn name(&self) -> &'static str {
        "svm-gaussian"
    }

    fn description(&self) -> &'static str {
        "sparse SVM on two shifted Gaussian clouds (--m examples, --n features, --lambda)"
    }

    fn run(&self, args: &BenchArgs, seed: u64) -> Result<RunOutcome> {
        let mut s = RandomStream::new(seed);
        let mut rows = Vec::with_capacity(args.m);
        let mut labels = Vec::with_capacity(args.m);
        for i in 0..args.m {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            rows.push(
                (0..args.n)
                    .map(|j| s.standard_normal() + if j == 0 { 2.0 * y } else { 0.0 })
                    .collect(),
            );
            labels.push(y);
        }
        let data = LabeledDataset::from_dense(&rows, labels)?;
        let (problem, layout) = build_sparse_svm_lp(&data, args.lambda)?;
        let cfg = LsConfig {
            delta: args.delta,
            beta: args.beta,
            tolerance: args.tol,
            max_epochs: args.max_epochs,
            seed,
            x0: None,
            log_every: args.max_epochs.max(1),
        };
        let (rep, trace) = ssp_ls_run(&problem, &cfg)?;
        let (w, d, _) = layout.decode(&rep.point);
        let mut report = ls_report(&rep);
        report
            .push("nnz_w", nnz(&w))
            .push("ordinary_errors_train", ordinary_errors(&w, d, &data));
        Ok(RunOutcome {
            report,
            trace,
            termination: rep.termination,
        })
    }
}

/// Name → experiment table used by `bench`.
pub struct ExperimentRegistry {
    entries: BTreeMap<&'static str, Box<dyn Experiment>>,
}

impl ExperimentRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(LsGaussian));
        r.register(Box::new(LpRandom));
        r.register(Box::new(SvmGaussian));
        r
    }

    pub fn register(&mut self, e: Box<dyn Experiment>) {
        self.entries.insert(e.name(), e);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Experiment> {
        self.entries.get(name).map(|e| e.as_ref()).ok_or_else(|| {
            let known: Vec<_> = self.entries.keys().copied().collect();
            SspError::config(format!("unknown experiment '{name}' (known: {})", known.join(", ")))
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn Experiment> {
        self.entries.values().map(|e| e.as_ref())
    }
}

impl Default for ExperimentRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

fn run_bench(args: &BenchArgs) -> Result<i32> {
    let registry = ExperimentRegistry::with_builtins();
    if args.list {
        for e in registry.iter() {
            println!("{:<14} {}", e.name(), e.description());
        }
        return Ok(0);
    }
    if args.seeds == 0 {
        return Err(SspError::config("need at least one seed"));
    }
    let experiment = registry.get(&args.experiment)?;
    let seeds: Vec<u64> = (args.seed..args.seed + args.seeds).collect();
    let outcomes: Vec<(u64, Result<RunOutcome>)> = seeds
        .par_iter()
        .map(|&s| {
            let out = experiment.run(args, s);
            if let (Ok(o), Some(base)) = (&out, &args.trace) {
                if let Err(e) = o.trace.write_csv(&suffixed_path(base, &format!("_s{s}"))) {
                    return (s, Err(e));
                }
            }
            (s, out)
        })
        .collect();

    let mut summary = Report::new();
    summary.push("experiment", experiment.name()).push("runs", seeds.len());
    let mut met = 0;
    let mut epochs = Vec::new();
    for (s, out) in &outcomes {
        let out = out.as_ref().map_err(|e| SspError::config(format!("seed {s}: {e}")))?;
        met += usize::from(out.termination == Termination::ToleranceMet);
        if let Some(e) = out.report.get("epochs").and_then(|v| v.parse::<f64>().ok()) {
            epochs.push(e);
        }
        for (k, v) in out.report.entries() {
            summary.push(&format!("seed_{s}_{k}"), v);
        }
    }
    summary.push("tolerance_met", met);
    if !epochs.is_empty() {
        summary.push("mean_epochs", epochs.iter().sum::<f64>() / epochs.len() as f64);
    }
    if let Some(p) = &args.report {
        summary.write(p)?;
    }
    print!("{}", summary.render());
    Ok(if met == seeds.len() { 0 } else { 2 })
}
