//! Stochastic subgradient projection: a proximal subgradient step on a
//! sampled objective piece, a Polyak step on a sampled constraint, then a
//! projection onto the simple set.

use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use log::info;

use crate::error::{Result, SspError};
use crate::linalg::{axpy, dist_sq};
use crate::problem::CompositeProblem;
use crate::prox::polyak_step_in_place;
use crate::rng::RandomStream;
use crate::stepsize::{AveragingMode, StepsizeRule};
use crate::trace::{ConvergenceTrace, TraceRow};

/// Default relaxation of the feasibility step.
pub const DEFAULT_BETA: f64 = 1.96;
/// Panels at most this large are evaluated exhaustively.
pub const FULL_PANEL_LIMIT: usize = 10_000;
/// Sample count for objective estimates over large index sets.
pub const OBJECTIVE_ESTIMATE_SAMPLES: usize = 1_000;

/// Running weighted average of iterates.
#[derive(Clone, Debug, PartialEq)]
pub struct AveragingState {
    pub mode: AveragingMode,
    weighted_sum: Vec<f64>,
    total: f64,
}

impl AveragingState {
    pub fn new(mode: AveragingMode, dimension: usize) -> Self {
        Self {
            mode,
            weighted_sum: vec![0.0; dimension],
            total: 0.0,
        }
    }

    /// Weight this mode gives iterate `x_k` produced with stepsize `alpha_k`.
    pub fn weight(&self, k: usize, alpha_k: f64) -> f64 {
        match self.mode {
            AveragingMode::ConvexWeighted { l } => alpha_k * (2.0 - alpha_k * l),
            AveragingMode::StronglyConvexWeighted { k0 } => {
                if k > k0 {
                    ((k + 1) as f64).powi(2)
                } else {
                    0.0
                }
            }
            AveragingMode::LastIterate => 0.0,
        }
    }

    pub fn update(&mut self, x_k: &[f64], k: usize, alpha_k: f64) {
        let w = self.weight(k, alpha_k);
        if w > 0.0 {
            axpy(w, x_k, &mut self.weighted_sum);
            self.total += w;
        }
    }

    /// Accumulated weight `S_k`.
    pub fn total_weight(&self) -> f64 {
        self.total
    }

    pub fn average(&self) -> Option<Vec<f64>> {
        (self.total > 0.0).then(|| self.weighted_sum.iter().map(|v| v / self.total).collect())
    }
}

/// Functional form: returns `avg` after folding in `x_k`.
pub fn update_average(mut avg: AveragingState, x_k: &[f64], k: usize, alpha_k: f64) -> AveragingState {
    avg.update(x_k, k, alpha_k);
    avg
}

#[derive(Clone, Debug)]
pub struct SspState {
    pub k: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub averaging: AveragingState,
}

impl SspState {
    /// Starts at `Π_Y(x0)`.
    pub fn new(problem: &CompositeProblem, x0: &[f64], mode: AveragingMode) -> Result<Self> {
        if x0.len() != problem.dimension() {
            return Err(SspError::dimension("initial point has wrong length"));
        }
        let x = problem.simple_set().project(x0);
        Ok(Self {
            k: 0,
            v: x.clone(),
            z: x.clone(),
            averaging: AveragingState::new(mode, x.len()),
            x,
        })
    }

    /// The averaged point when it exists, else the current iterate.
    pub fn reported_point(&self) -> Vec<f64> {
        self.averaging.average().unwrap_or_else(|| self.x.clone())
    }
}

/// What one iteration used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInfo {
    pub alpha: f64,
    pub zeta: usize,
    pub xi: Option<usize>,
    pub h_plus: f64,
}

/// One iteration with explicitly supplied indices.
pub fn ssp_step_with(
    state: &mut SspState,
    problem: &CompositeProblem,
    rule: &dyn StepsizeRule,
    beta: f64,
    zeta: usize,
    xi: Option<usize>,
) -> Result<StepInfo> {
    let k = state.k;
    let alpha = rule.alpha(k);
    let objective = problem.objective();

    // v_k = prox_{αg}(x_k − α∇f(x_k))
    let mut grad = vec![0.0; state.x.len()];
    objective.subgradient(zeta, &state.x, &mut grad);
    state.v.copy_from_slice(&state.x);
    axpy(-alpha, &grad, &mut state.v);
    objective.prox(zeta, alpha, &mut state.v);

    // z_k: Polyak step on the sampled constraint
    state.z.copy_from_slice(&state.v);
    let mut h_plus = 0.0;
    if let (Some(xi), Some(set)) = (xi, problem.constraints()) {
        let mut gh = vec![0.0; state.x.len()];
        h_plus = set.family.eval(xi, &state.v, &mut gh).max(0.0);
        polyak_step_in_place(&mut state.z, h_plus, &gh, beta)?;
    }

    // x_{k+1} = Π_Y(z_k)
    state.x.copy_from_slice(&state.z);
    problem.simple_set().project_in_place(&mut state.x);
    if state.x.iter().any(|v| !v.is_finite()) {
        return Err(SspError::NonFinite {
            iteration: k,
            what: "x".into(),
        });
    }
    state.k = k + 1;
    let next_alpha = rule.alpha(state.k);
    state.averaging.update(&state.x, state.k, next_alpha);
    Ok(StepInfo {
        alpha,
        zeta,
        xi,
        h_plus,
    })
}

/// One iteration, drawing `ζ` then `ξ` from `stream`.
pub fn ssp_step(
    state: &mut SspState,
    problem: &CompositeProblem,
    rule: &dyn StepsizeRule,
    beta: f64,
    stream: &mut RandomStream,
) -> Result<StepInfo> {
    let (zeta, xi) = problem.draw_indices(stream);
    ssp_step_with(state, problem, rule, beta, zeta, xi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    ToleranceMet,
    MaxIterations,
    MaxTime,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::ToleranceMet => "tolerance_met",
            Termination::MaxIterations => "max_iterations",
            Termination::MaxTime => "max_time",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Averaged point for averaging modes, last iterate otherwise.
    pub point: Vec<f64>,
    pub last_iterate: Vec<f64>,
    pub iterations: usize,
    pub epochs: f64,
    pub obj_est: Option<f64>,
    pub feas_residual: f64,
    pub termination: Termination,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub stepsize: Arc<dyn StepsizeRule>,
    pub beta: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub max_time: Option<Duration>,
    /// Stop once the feasibility residual of the reported point is at most
    /// this and the objective estimate moved by at most `stall_tolerance`
    /// (relative) since the previous checkpoint.
    pub tolerance: Option<f64>,
    pub stall_tolerance: Option<f64>,
    /// Overrides the stepsize rule's default averaging.
    pub averaging: Option<AveragingMode>,
    /// Checkpoint interval in iterations (trace rows and stopping checks).
    pub log_every: usize,
    pub x0: Option<Vec<f64>>,
}

impl SolverConfig {
    pub fn new(stepsize: Arc<dyn StepsizeRule>) -> Self {
        Self {
            stepsize,
            beta: DEFAULT_BETA,
            seed: 0,
            max_iterations: 10_000,
            max_time: None,
            tolerance: None,
            stall_tolerance: None,
            averaging: None,
            log_every: 100,
            x0: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(SspError::config("beta must lie in (0, 2)"));
        }
        if self.log_every == 0 {
            return Err(SspError::config("log_every must be positive"));
        }
        Ok(())
    }

    pub fn averaging_mode(&self) -> AveragingMode {
        self.averaging.unwrap_or_else(|| self.stepsize.default_averaging())
    }
}

/// Fixed evaluation panels for objective estimates and feasibility residuals.
pub struct Evaluator<'a> {
    problem: &'a CompositeProblem,
    objective_terms: Vec<(usize, f64)>,
    constraint_panel: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a CompositeProblem, seed: u64) -> Self {
        let sampler = problem.objective_sampler();
        let objective_terms = match (sampler.len(), sampler.probabilities()) {
            (Some(n), Some(p)) if n <= FULL_PANEL_LIMIT => {
                p.iter().cloned().enumerate().filter(|(_, w)| *w > 0.0).collect()
            }
            _ => {
                let mut s = RandomStream::derived(seed, 2);
                let w = 1.0 / OBJECTIVE_ESTIMATE_SAMPLES as f64;
                (0..OBJECTIVE_ESTIMATE_SAMPLES)
                    .map(|_| (sampler.sample(&mut s), w))
                    .collect()
            }
        };
        let constraint_panel = match problem.constraints() {
            None => Vec::new(),
            Some(set) => match set.sampler.len() {
                Some(n) if n <= FULL_PANEL_LIMIT => (0..n).collect(),
                _ => {
                    let mut s = RandomStream::derived(seed, 1);
                    (0..FULL_PANEL_LIMIT).map(|_| set.sampler.sample(&mut s)).collect()
                }
            },
        };
        Self {
            problem,
            objective_terms,
            constraint_panel,
        }
    }

    pub fn objective(&self, x: &[f64]) -> Option<f64> {
        let obj = self.problem.objective();
        self.objective_terms
            .iter()
            .map(|(i, w)| obj.value(*i, x).map(|v| w * v))
            .sum()
    }

    /// `max (h(x,ξ))₊` over the panel.
    pub fn feasibility_residual(&self, x: &[f64]) -> f64 {
        match self.problem.constraints() {
            None => 0.0,
            Some(set) => self
                .constraint_panel
                .iter()
                .map(|&i| set.family.value(i, x).max(0.0))
                .fold(0.0, f64::max),
        }
    }
}

fn samples_per_iteration(problem: &CompositeProblem) -> usize {
    1 + usize::from(problem.constraints().is_some())
}

fn index_count(problem: &CompositeProblem) -> Option<usize> {
    let n1 = problem.objective_sampler().len()?;
    let n2 = match problem.constraints() {
        Some(c) => c.sampler.len()?,
        None => 0,
    };
    Some(n1 + n2)
}

/// Runs until the stopping rule fires.
pub fn ssp_run(problem: &CompositeProblem, config: &SolverConfig) -> Result<(SolveReport, ConvergenceTrace)> {
    config.validate()?;
    let start = Instant::now();
    let n = problem.dimension();
    let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let mut state = SspState::new(problem, &x0, config.averaging_mode())?;
    let mut stream = RandomStream::new(config.seed);
    let eval = Evaluator::new(problem, config.seed);
    let rule = config.stepsize.as_ref();
    let opt_point = problem.optimum().point.as_deref();

    let mut rows = Vec::new();
    let mut prev_obj: Option<f64> = None;
    let checkpoint = |state: &SspState, rows: &mut Vec<TraceRow>| {
        let p = state.reported_point();
        let obj = eval.objective(&p);
        let feas = eval.feasibility_residual(&p);
        rows.push(TraceRow {
            iter: state.k,
            alpha: rule.alpha(state.k),
            obj_est: obj,
            feas_residual: feas,
            dist_sq_opt: opt_point.map(|o| dist_sq(&p, o)),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        info!("iter {}: obj_est {obj:?}, feas_residual {feas:e}", state.k);
        (obj, feas)
    };

    checkpoint(&state, &mut rows);
    let termination = loop {
        if state.k >= config.max_iterations {
            break Termination::MaxIterations;
        }
        if config.max_time.is_some_and(|t| start.elapsed() >= t) {
            break Termination::MaxTime;
        }
        ssp_step(&mut state, problem, rule, config.beta, &mut stream)?;
        if state.k % config.log_every == 0 {
            let (obj, feas) = checkpoint(&state, &mut rows);
            if let Some(tol) = config.tolerance {
                let stall = config.stall_tolerance.unwrap_or(tol);
                let stalled = match (obj, prev_obj) {
                    (Some(a), Some(b)) => (a - b).abs() <= stall * a.abs().max(1.0),
                    (None, _) => true,
                    (Some(_), None) => false,
                };
                prev_obj = obj;
                if feas <= tol && stalled {
                    break Termination::ToleranceMet;
                }
            }
        }
    };
    if rows.last().map(|r| r.iter) != Some(state.k) {
        checkpoint(&state, &mut rows);
    }

    let point = state.reported_point();
    let last = rows.last().expect("at least one checkpoint");
    let epochs = match index_count(problem) {
        Some(total) => (state.k * samples_per_iteration(problem)) as f64 / total as f64,
        None => state.k as f64,
    };
    let report = SolveReport {
        obj_est: last.obj_est,
        feas_residual: last.feas_residual,
        last_iterate: state.x.clone(),
        point,
        iterations: state.k,
        epochs,
        termination,
        elapsed: start.elapsed(),
    };
    Ok((report, ConvergenceTrace::Ssp(rows)))
}
