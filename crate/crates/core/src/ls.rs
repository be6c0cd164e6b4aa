//! Stochastic subgradient projection specialized to linear systems
//! `find x ∈ Y : Ax = b, Cx ≤ d`, with an adaptive stepsize on sampled
//! equality blocks and Polyak steps on sampled inequality rows.

use std::time::Instant;

use log::{info, warn};

use crate::error::{Result, SspError};
use crate::linalg::{norm_sq, singular_extremes, Matrix};
use crate::problem::{estimate_ls_constants, AssumptionConstants};
use crate::prox::SimpleSet;
use crate::rng::{Categorical, IndexSampler, RandomStream};
use crate::ssp::Termination;
use crate::trace::{ConvergenceTrace, LsTraceRow};

/// `‖block_i‖²_F / Σ_j ‖block_j‖²_F`.
pub fn frobenius_distribution(blocks: &[Matrix]) -> Result<Vec<f64>> {
    if blocks.is_empty() {
        return Err(SspError::config("no blocks"));
    }
    let norms: Vec<f64> = blocks.iter().map(Matrix::frobenius_sq).collect();
    let total: f64 = norms.iter().sum();
    if total == 0.0 {
        return Err(SspError::config("all-zero matrix has no Frobenius distribution"));
    }
    Ok(norms.into_iter().map(|v| v / total).collect())
}

/// `δ‖r‖²/‖w‖²` with `r = A_ζᵀx − b_ζ`, `w = A_ζ r`; zero when `r = 0`.
pub fn adaptive_stepsize_ls(r: &[f64], w: &[f64], delta: f64) -> Result<f64> {
    let r2 = norm_sq(r);
    if r2 == 0.0 {
        return Ok(0.0);
    }
    let w2 = norm_sq(w);
    if w2 == 0.0 {
        return Err(SspError::Inconsistent(
            "nonzero block residual with zero image: block equations are inconsistent".into(),
        ));
    }
    Ok(delta * r2 / w2)
}

/// `max_ζ σ_max(A_ζ)/σ_min⁺(A_ζ)`; all-zero blocks are skipped.
pub fn kappa_block(blocks: &[Matrix]) -> Result<f64> {
    if blocks.is_empty() {
        return Err(SspError::config("no blocks"));
    }
    let mut kappa: Option<f64> = None;
    for (i, b) in blocks.iter().enumerate() {
        match singular_extremes(b) {
            Some((smax, smin)) => kappa = Some(kappa.map_or(smax / smin, |k| k.max(smax / smin))),
            None => warn!("block {i} is zero; skipped in kappa_block"),
        }
    }
    kappa.ok_or_else(|| SspError::config("every block is zero"))
}

/// `1 − (1/c)·min(δ(2−δ)/(2κ²), (2−δ)/(4δ), β(2−β)/2)`.
pub fn theoretical_contraction(delta: f64, beta: f64, kappa: f64, c: f64) -> f64 {
    let m = (delta * (2.0 - delta) / (2.0 * kappa * kappa))
        .min((2.0 - delta) / (4.0 * delta))
        .min(beta * (2.0 - beta) / 2.0);
    1.0 - m / c
}

/// `find x ∈ Y : Ax = b, Cx ≤ d` with equality rows grouped into contiguous
/// blocks and inequalities sampled one row at a time.
#[derive(Clone, Debug)]
pub struct LinearFeasibilityProblem {
    a: Matrix,
    b: Vec<f64>,
    block_ranges: Vec<(usize, usize)>,
    c: Matrix,
    d: Vec<f64>,
    simple_set: SimpleSet,
    eq_dist: Option<Categorical>,
    ineq_dist: Option<Categorical>,
    constants: AssumptionConstants,
}

impl LinearFeasibilityProblem {
    /// Frobenius-weighted sampling. `a` or `c` may have zero rows.
    pub fn new(
        a: Matrix,
        b: Vec<f64>,
        c: Matrix,
        d: Vec<f64>,
        simple_set: SimpleSet,
        block_size: usize,
    ) -> Result<Self> {
        if a.ncols() != c.ncols() {
            return Err(SspError::dimension(format!(
                "A has {} columns, C has {}",
                a.ncols(),
                c.ncols()
            )));
        }
        if a.nrows() != b.len() || c.nrows() != d.len() {
            return Err(SspError::dimension("right-hand side length mismatch"));
        }
        if block_size == 0 {
            return Err(SspError::config("block size must be positive"));
        }
        if a.nrows() + c.nrows() == 0 {
            return Err(SspError::config("system has no rows"));
        }
        simple_set.validate()?;
        let block_ranges: Vec<(usize, usize)> = (0..a.nrows())
            .step_by(block_size)
            .map(|s| (s, (s + block_size).min(a.nrows())))
            .collect();
        let blocks: Vec<Matrix> = block_ranges.iter().map(|&(s, e)| a.row_block(s, e)).collect();
        let eq_dist = if blocks.is_empty() {
            None
        } else {
            Some(Categorical::from_weights(&frobenius_distribution(&blocks)?)?)
        };
        let ineq_dist = if c.nrows() == 0 {
            None
        } else {
            let w: Vec<f64> = (0..c.nrows()).map(|i| c.row(i).norm_sq()).collect();
            Some(Categorical::from_weights(&w)?)
        };
        let mut constants = if blocks.is_empty() {
            AssumptionConstants::new(0.0, 0.0, 0.0, 1.0, None)?
        } else {
            estimate_ls_constants(&blocks)?
        };
        if let Some(bh) = (0..c.nrows()).map(|i| c.row(i).norm_sq()).reduce(f64::max) {
            if bh > 0.0 {
                constants.b_h = bh.sqrt();
            }
        }
        Ok(Self {
            a,
            b,
            block_ranges,
            c,
            d,
            simple_set,
            eq_dist,
            ineq_dist,
            constants,
        })
    }

    /// Replaces the sampling weights (unnormalized, nonnegative).
    pub fn with_weights(mut self, eq: Option<&[f64]>, ineq: Option<&[f64]>) -> Result<Self> {
        if let Some(w) = eq {
            if w.len() != self.block_ranges.len() {
                return Err(SspError::dimension("one equality weight per block"));
            }
            self.eq_dist = Some(Categorical::from_weights(w)?);
        }
        if let Some(w) = ineq {
            if w.len() != self.c.nrows() {
                return Err(SspError::dimension("one inequality weight per row"));
            }
            self.ineq_dist = Some(Categorical::from_weights(w)?);
        }
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.a.ncols()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn simple_set(&self) -> &SimpleSet {
        &self.simple_set
    }

    pub fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    pub fn num_blocks(&self) -> usize {
        self.block_ranges.len()
    }

    pub fn block_range(&self, zeta: usize) -> (usize, usize) {
        self.block_ranges[zeta]
    }

    pub fn blocks(&self) -> Vec<Matrix> {
        self.block_ranges.iter().map(|&(s, e)| self.a.row_block(s, e)).collect()
    }

    pub fn equality_weights(&self) -> Option<&[f64]> {
        self.eq_dist.as_ref().and_then(|d| d.probabilities())
    }

    pub fn inequality_weights(&self) -> Option<&[f64]> {
        self.ineq_dist.as_ref().and_then(|d| d.probabilities())
    }

    /// `‖Ax − b‖`
    pub fn eq_residual(&self, x: &[f64]) -> f64 {
        (0..self.a.nrows())
            .map(|i| (self.a.row(i).dot(x) - self.b[i]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `‖(Cx − d)₊‖`
    pub fn ineq_residual(&self, x: &[f64]) -> f64 {
        (0..self.c.nrows())
            .map(|i| (self.c.row(i).dot(x) - self.d[i]).max(0.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Draws `ζ` then `ξ`; each is absent when its part of the system is empty.
    pub fn draw_indices(&self, stream: &mut RandomStream) -> (Option<usize>, Option<usize>) {
        let zeta = self.eq_dist.as_ref().map(|d| d.sample(stream));
        let xi = self.ineq_dist.as_ref().map(|d| d.sample(stream));
        (zeta, xi)
    }

    fn samples_per_iteration(&self) -> usize {
        usize::from(self.eq_dist.is_some()) + usize::from(self.ineq_dist.is_some())
    }

    /// Iterations making up one expected pass over all blocks and rows.
    pub fn iterations_per_epoch(&self) -> usize {
        let total = self.num_blocks() + self.c.nrows();
        total.div_ceil(self.samples_per_iteration())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LsConfig {
    pub delta: f64,
    pub beta: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub x0: Option<Vec<f64>>,
    /// Progress is logged every this many epochs.
    pub log_every: usize,
}

impl Default for LsConfig {
    fn default() -> Self {
        Self {
            delta: 1.96,
            beta: 1.96,
            tolerance: 1e-3,
            max_epochs: 2000,
            seed: 0,
            x0: None,
            log_every: 100,
        }
    }
}

impl LsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 2.0) {
            return Err(SspError::config("delta must lie in (0, 2)"));
        }
        if !(self.beta > 0.0 && self.beta < 2.0) {
            return Err(SspError::config("beta must lie in (0, 2)"));
        }
        if !(self.tolerance > 0.0) {
            return Err(SspError::config("tolerance must be positive"));
        }
        if self.log_every == 0 {
            return Err(SspError::config("log_every must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LsState {
    pub k: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
}

impl LsState {
    pub fn new(problem: &LinearFeasibilityProblem, x0: &[f64]) -> Result<Self> {
        if x0.len() != problem.dimension() {
            return Err(SspError::dimension("initial point has wrong length"));
        }
        let x = problem.simple_set.project(x0);
        Ok(Self {
            k: 0,
            v: x.clone(),
            z: x.clone(),
            x,
        })
    }
}

/// One iteration with explicitly supplied indices. Returns the stepsize used.
pub fn ssp_ls_step_with(
    state: &mut LsState,
    problem: &LinearFeasibilityProblem,
    delta: f64,
    beta: f64,
    zeta: Option<usize>,
    xi: Option<usize>,
) -> Result<f64> {
    let n = state.x.len();
    state.v.copy_from_slice(&state.x);
    let mut alpha = 0.0;
    if let Some(zeta) = zeta {
        let (s, e) = problem.block_ranges[zeta];
        let r: Vec<f64> = (s..e).map(|i| problem.a.row(i).dot(&state.x) - problem.b[i]).collect();
        let mut w = vec![0.0; n];
        for (i, ri) in (s..e).zip(&r) {
            problem.a.row(i).axpy_into(*ri, &mut w);
        }
        alpha = adaptive_stepsize_ls(&r, &w, delta)?;
        if alpha > 0.0 {
            crate::linalg::axpy(-alpha, &w, &mut state.v);
        }
    }

    state.z.copy_from_slice(&state.v);
    if let Some(xi) = xi {
        let row = problem.c.row(xi);
        let excess = (row.dot(&state.v) - problem.d[xi]).max(0.0);
        if excess > 0.0 {
            let c2 = row.norm_sq();
            if c2 == 0.0 {
                return Err(SspError::Inconsistent(format!("inequality row {xi} reads 0 ≤ d < 0")));
            }
            row.axpy_into(-beta * excess / c2, &mut state.z);
        }
    }

    state.x.copy_from_slice(&state.z);
    problem.simple_set.project_in_place(&mut state.x);
    if state.x.iter().any(|v| !v.is_finite()) {
        return Err(SspError::NonFinite {
            iteration: state.k,
            what: "x".into(),
        });
    }
    state.k += 1;
    Ok(alpha)
}

pub fn ssp_ls_step(
    state: &mut LsState,
    problem: &LinearFeasibilityProblem,
    config: &LsConfig,
    stream: &mut RandomStream,
) -> Result<f64> {
    let (zeta, xi) = problem.draw_indices(stream);
    ssp_ls_step_with(state, problem, config.delta, config.beta, zeta, xi)
}

#[derive(Clone, Debug)]
pub struct LsReport {
    pub point: Vec<f64>,
    pub epochs: usize,
    pub iterations: usize,
    pub eq_residual: f64,
    pub ineq_residual: f64,
    pub termination: Termination,
    pub elapsed: std::time::Duration,
}

impl LsReport {
    pub fn residual(&self) -> f64 {
        self.eq_residual.max(self.ineq_residual)
    }
}

/// Iterates until `max(‖Ax−b‖, ‖(Cx−d)₊‖) ≤ tolerance` (checked once per
/// epoch) or the epoch budget runs out.
pub fn ssp_ls_run(problem: &LinearFeasibilityProblem, config: &LsConfig) -> Result<(LsReport, ConvergenceTrace)> {
    config.validate()?;
    let start = Instant::now();
    let x0 = config.x0.clone().unwrap_or_else(|| vec![0.0; problem.dimension()]);
    let mut state = LsState::new(problem, &x0)?;
    let mut stream = RandomStream::new(config.seed);
    let per_epoch = problem.iterations_per_epoch();
    let mut rows = Vec::new();
    let mut epoch = 0;
    let termination = loop {
        let eq = problem.eq_residual(&state.x);
        let ineq = problem.ineq_residual(&state.x);
        rows.push(LsTraceRow {
            epoch,
            eq_residual: eq,
            ineq_residual: ineq,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if epoch % config.log_every == 0 {
            info!("epoch {epoch}: eq_residual {eq:e}, ineq_residual {ineq:e}");
        }
        if eq.max(ineq) <= config.tolerance {
            break Termination::ToleranceMet;
        }
        if epoch >= config.max_epochs {
            break Termination::MaxIterations;
        }
        for _ in 0..per_epoch {
            ssp_ls_step(&mut state, problem, config, &mut stream)?;
        }
        epoch += 1;
    };
    let last = rows.last().expect("one row per epoch");
    let report = LsReport {
        eq_residual: last.eq_residual,
        ineq_residual: last.ineq_residual,
        point: state.x,
        epochs: epoch,
        iterations: state.k,
        termination,
        elapsed: start.elapsed(),
    };
    Ok((report, ConvergenceTrace::Ls(rows)))
}
