//! The composite problem `min E[f(x,ζ) + g(x,ζ)]` subject to `h(x,ξ) ≤ 0` for
//! all ξ and `x ∈ Y`, expressed as sampling oracles.

use std::sync::Arc;

use log::warn;

use crate::error::{Result, SspError};
use crate::linalg::{spectral_norm, Matrix};
use crate::prox::SimpleSet;
use crate::rng::{IndexSampler, RandomStream};

/// Per-index objective pieces `f(·,ζ)` (subgradient oracle) and `g(·,ζ)`
/// (prox oracle).
pub trait ObjectiveFamily: Send + Sync {
    fn dimension(&self) -> usize;

    /// Writes one subgradient of `f(·,idx)` at `x` into `out`.
    fn subgradient(&self, idx: usize, x: &[f64], out: &mut [f64]);

    /// Replaces `x` with `prox_{α·g(·,idx)}(x)`. Default: `g = 0`.
    fn prox(&self, _idx: usize, _alpha: f64, _x: &mut [f64]) {}

    /// `f(x,idx) + g(x,idx)`, when the family can evaluate it.
    fn value(&self, _idx: usize, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// Per-index functional constraints `h(·,ξ) ≤ 0`.
pub trait ConstraintFamily: Send + Sync {
    fn dimension(&self) -> usize;

    /// Returns `h(x,idx)` and writes one subgradient into `grad`.
    fn eval(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, idx: usize, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; x.len()];
        self.eval(idx, x, &mut scratch)
    }

    /// Declared bound `B_h` on subgradient norms, if any.
    fn subgradient_bound(&self) -> Option<f64> {
        None
    }
}

/// Constants of the growth, convexity, boundedness and regularity conditions.
/// They steer stepsize defaults and diagnostics only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AssumptionConstants {
    pub l: f64,
    pub b: f64,
    pub mu: f64,
    pub b_h: f64,
    pub c: Option<f64>,
}

impl AssumptionConstants {
    pub fn new(l: f64, b: f64, mu: f64, b_h: f64, c: Option<f64>) -> Result<Self> {
        let k = Self { l, b, mu, b_h, c };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l >= 0.0 && self.b >= 0.0 && self.mu >= 0.0) {
            return Err(SspError::config("L, B and mu must be nonnegative"));
        }
        if !(self.b_h > 0.0) {
            return Err(SspError::config("B_h must be positive"));
        }
        if let Some(c) = self.c {
            if !(c > 0.0) || c * self.b_h * self.b_h <= 1.0 {
                return Err(SspError::config("regularity constant needs c > 0 and c·B_h² > 1"));
            }
        }
        Ok(())
    }
}

/// Known optimum, used by traces and tests.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptimumHint {
    pub value: Option<f64>,
    pub point: Option<Vec<f64>>,
}

#[derive(Clone)]
pub struct ConstraintSet {
    pub family: Arc<dyn ConstraintFamily>,
    pub sampler: Arc<dyn IndexSampler>,
}

/// Oracle bundle for one problem instance. Immutable once built.
#[derive(Clone)]
pub struct CompositeProblem {
    dimension: usize,
    objective: Arc<dyn ObjectiveFamily>,
    objective_sampler: Arc<dyn IndexSampler>,
    constraints: Option<ConstraintSet>,
    simple_set: SimpleSet,
    constants: Option<AssumptionConstants>,
    optimum: OptimumHint,
}

impl CompositeProblem {
    pub fn new(
        objective: Arc<dyn ObjectiveFamily>,
        objective_sampler: Arc<dyn IndexSampler>,
        simple_set: SimpleSet,
    ) -> Result<Self> {
        let dimension = objective.dimension();
        if dimension == 0 {
            return Err(SspError::config("problem dimension must be positive"));
        }
        if objective_sampler.len() == Some(0) {
            return Err(SspError::config("empty objective index set"));
        }
        simple_set.validate()?;
        check_set_dimension(&simple_set, dimension)?;
        Ok(Self {
            dimension,
            objective,
            objective_sampler,
            constraints: None,
            simple_set,
            constants: None,
            optimum: OptimumHint::default(),
        })
    }

    pub fn with_constraints(
        mut self,
        family: Arc<dyn ConstraintFamily>,
        sampler: Arc<dyn IndexSampler>,
    ) -> Result<Self> {
        if family.dimension() != self.dimension {
            return Err(SspError::dimension(format!(
                "constraints act on dimension {}, objective on {}",
                family.dimension(),
                self.dimension
            )));
        }
        if sampler.len() == Some(0) {
            return Err(SspError::config("empty constraint index set"));
        }
        self.constraints = Some(ConstraintSet { family, sampler });
        Ok(self)
    }

    pub fn with_constants(mut self, constants: AssumptionConstants) -> Result<Self> {
        constants.validate()?;
        self.constants = Some(constants);
        Ok(self)
    }

    pub fn with_optimum(mut self, optimum: OptimumHint) -> Self {
        self.optimum = optimum;
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn objective(&self) -> &dyn ObjectiveFamily {
        self.objective.as_ref()
    }

    pub fn objective_sampler(&self) -> &dyn IndexSampler {
        self.objective_sampler.as_ref()
    }

    pub fn constraints(&self) -> Option<&ConstraintSet> {
        self.constraints.as_ref()
    }

    pub fn simple_set(&self) -> &SimpleSet {
        &self.simple_set
    }

    pub fn constants(&self) -> Option<&AssumptionConstants> {
        self.constants.as_ref()
    }

    pub fn optimum(&self) -> &OptimumHint {
        &self.optimum
    }

    /// Draws this iteration's indices: ζ first, then ξ (absent when the
    /// problem has no functional constraints).
    pub fn draw_indices(&self, stream: &mut RandomStream) -> (usize, Option<usize>) {
        let zeta = self.objective_sampler.sample(stream);
        let xi = self.constraints.as_ref().map(|c| c.sampler.sample(stream));
        (zeta, xi)
    }

    pub fn sample_objective(&self, stream: &mut RandomStream) -> ObjectiveSample<'_> {
        ObjectiveSample {
            index: self.objective_sampler.sample(stream),
            problem: self,
        }
    }

    /// Draws ξ and evaluates `h(·,ξ)` at `x`. `None` without constraints.
    pub fn sample_constraint(&self, stream: &mut RandomStream, x: &[f64]) -> Option<ConstraintSample> {
        let set = self.constraints.as_ref()?;
        let index = set.sampler.sample(stream);
        Some(self.constraint_at(index, x).expect("constraints present"))
    }

    pub fn constraint_at(&self, index: usize, x: &[f64]) -> Option<ConstraintSample> {
        let set = self.constraints.as_ref()?;
        let mut subgradient = vec![0.0; self.dimension];
        let value = set.family.eval(index, x, &mut subgradient);
        Some(ConstraintSample {
            index,
            value,
            subgradient,
        })
    }
}

fn check_set_dimension(set: &SimpleSet, n: usize) -> Result<()> {
    let ok = match set {
        SimpleSet::Box { lower, .. } => lower.len() == n,
        SimpleSet::Halfspace { c, .. } | SimpleSet::Hyperplane { c, .. } => c.len() == n,
        SimpleSet::NonnegativeCoords(idx) => idx.iter().all(|&i| i < n),
        SimpleSet::WholeSpace | SimpleSet::NonnegativeOrthant => true,
    };
    if ok {
        Ok(())
    } else {
        Err(SspError::dimension(format!("simple set does not match dimension {n}")))
    }
}

/// A drawn objective index with access to its oracles.
pub struct ObjectiveSample<'a> {
    pub index: usize,
    problem: &'a CompositeProblem,
}

impl ObjectiveSample<'_> {
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.problem.objective.subgradient(self.index, x, &mut out);
        out
    }

    pub fn prox(&self, alpha: f64, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.problem.objective.prox(self.index, alpha, &mut out);
        out
    }

    pub fn value(&self, x: &[f64]) -> Option<f64> {
        self.problem.objective.value(self.index, x)
    }
}

/// A drawn constraint evaluated at a query point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSample {
    pub index: usize,
    pub value: f64,
    pub subgradient: Vec<f64>,
}

impl ConstraintSample {
    pub fn positive_part(&self) -> f64 {
        self.value.max(0.0)
    }
}

/// `L = 2·max_ζ ‖A_ζ‖²` and `B = 0` for the least-squares objective
/// `½E‖A_ζᵀx − b_ζ‖²`. `B_h` is set to 1 here; callers that know the
/// constraint rows overwrite it.
pub fn estimate_ls_constants(blocks: &[Matrix]) -> Result<AssumptionConstants> {
    if blocks.is_empty() {
        return Err(SspError::config("no blocks"));
    }
    let max_sq = blocks.iter().map(|b| spectral_norm(b).powi(2)).fold(0.0, f64::max);
    if max_sq == 0.0 {
        warn!("all blocks are zero; the least-squares objective is constant");
    }
    AssumptionConstants::new(2.0 * max_sq, 0.0, 0.0, 1.0, None)
}

// ---------------------------------------------------------------------------
// Common families

/// `f = g = 0` over `Ω₁ = {0}`.
#[derive(Clone, Debug)]
pub struct ZeroObjective {
    pub dimension: usize,
}

impl ObjectiveFamily for ZeroObjective {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn subgradient(&self, _idx: usize, _x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
    }

    fn value(&self, _idx: usize, _x: &[f64]) -> Option<f64> {
        Some(0.0)
    }
}

/// `f(x,ζ) = ½(a_ζᵀx − b_ζ)²`, one term per row of `a`.
#[derive(Clone, Debug)]
pub struct QuadraticRows {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl ObjectiveFamily for QuadraticRows {
    fn dimension(&self) -> usize {
        self.a.ncols()
    }

    fn subgradient(&self, idx: usize, x: &[f64], out: &mut [f64]) {
        let row = self.a.row(idx);
        let r = row.dot(x) - self.b[idx];
        out.iter_mut().for_each(|v| *v = 0.0);
        row.axpy_into(r, out);
    }

    fn value(&self, idx: usize, x: &[f64]) -> Option<f64> {
        let r = self.a.row(idx).dot(x) - self.b[idx];
        Some(0.5 * r * r)
    }
}

/// `h(x,ξ) = c_ξᵀx − d_ξ`, one constraint per row of `c`.
#[derive(Clone, Debug)]
pub struct AffineConstraints {
    pub c: Matrix,
    pub d: Vec<f64>,
}

impl AffineConstraints {
    pub fn new(c: Matrix, d: Vec<f64>) -> Result<Self> {
        if c.nrows() != d.len() {
            return Err(SspError::dimension("constraint rows and rhs differ in length"));
        }
        Ok(Self { c, d })
    }
}

impl ConstraintFamily for AffineConstraints {
    fn dimension(&self) -> usize {
        self.c.ncols()
    }

    fn eval(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let row = self.c.row(idx);
        grad.iter_mut().for_each(|v| *v = 0.0);
        row.axpy_into(1.0, grad);
        row.dot(x) - self.d[idx]
    }

    fn value(&self, idx: usize, x: &[f64]) -> f64 {
        self.c.row(idx).dot(x) - self.d[idx]
    }

    fn subgradient_bound(&self) -> Option<f64> {
        let m = (0..self.c.nrows()).map(|i| self.c.row(i).norm_sq()).fold(0.0, f64::max);
        (m > 0.0).then(|| m.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Categorical;

    fn halfplane_problem() -> CompositeProblem {
        let c = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        CompositeProblem::new(
            Arc::new(ZeroObjective { dimension: 2 }),
            Arc::new(Categorical::uniform(1).unwrap()),
            SimpleSet::WholeSpace,
        )
        .unwrap()
        .with_constraints(
            Arc::new(AffineConstraints::new(c, vec![1.0]).unwrap()),
            Arc::new(Categorical::uniform(1).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn constraint_sample_examples() {
        let p = halfplane_problem();
        let s = p.constraint_at(0, &[3.0, 0.0]).unwrap();
        assert_eq!(s.value, 2.0);
        assert_eq!(s.subgradient, vec![1.0, 0.0]);
        let s = p.constraint_at(0, &[0.0, 0.0]).unwrap();
        assert_eq!(s.value, -1.0);
        assert_eq!(s.positive_part(), 0.0);
    }

    #[test]
    fn ls_constants_examples() {
        let k = estimate_ls_constants(&[Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap()]).unwrap();
        assert!((k.l - 2.0).abs() < 1e-12);
        assert_eq!(k.b, 0.0);
        let k = estimate_ls_constants(&[
            Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap(),
            Matrix::from_rows(&[vec![0.0, 2.0]]).unwrap(),
        ])
        .unwrap();
        assert!((k.l - 8.0).abs() < 1e-12);
        let k = estimate_ls_constants(&[Matrix::zeros(2, 2)]).unwrap();
        assert_eq!(k.l, 0.0);
        assert!(estimate_ls_constants(&[]).is_err());
    }

    #[test]
    fn constants_validation() {
        assert!(AssumptionConstants::new(-1.0, 0.0, 0.0, 1.0, None).is_err());
        assert!(AssumptionConstants::new(0.0, 0.0, 0.0, 0.0, None).is_err());
        assert!(AssumptionConstants::new(0.0, 0.0, 0.0, 1.0, Some(0.5)).is_err());
        assert!(AssumptionConstants::new(0.0, 0.0, 0.0, 1.0, Some(2.0)).is_ok());
    }

    #[test]
    fn mismatched_constraint_dimension_rejected() {
        let c = Matrix::from_rows(&[vec![1.0, 0.0, 0.0]]).unwrap();
        let p = CompositeProblem::new(
            Arc::new(ZeroObjective { dimension: 2 }),
            Arc::new(Categorical::uniform(1).unwrap()),
            SimpleSet::WholeSpace,
        )
        .unwrap();
        assert!(p
            .with_constraints(
                Arc::new(AffineConstraints::new(c, vec![1.0]).unwrap()),
                Arc::new(Categorical::uniform(1).unwrap()),
            )
            .is_err());
    }
}
