//! Problem builders: constrained least squares, LP feasibility through the
//! primal-dual system, sparse linear SVM as an LP, and the robust sparse SVM
//! with ellipsoidal uncertainty.

use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::error::{Result, SspError};
use crate::linalg::{dot, norm, Matrix};
use crate::ls::LinearFeasibilityProblem;
use crate::problem::{AssumptionConstants, CompositeProblem, ConstraintFamily, ObjectiveFamily};
use crate::prox::{soc_eval_subgrad, soft_threshold_in_place, SimpleSet, SocDatum};
use crate::rng::{Categorical, RandomStream};

/// Two-class data with sparse features and ±1 labels.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    n_features: usize,
    features: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
}

impl LabeledDataset {
    /// `features[i]` holds `(index, value)` pairs with 0-based, strictly
    /// increasing indices below `n_features`.
    pub fn new(n_features: usize, features: Vec<Vec<(usize, f64)>>, labels: Vec<f64>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(SspError::dimension("one label per example"));
        }
        if let Some(i) = labels.iter().position(|y| *y != 1.0 && *y != -1.0) {
            return Err(SspError::config(format!("label of example {i} is not ±1")));
        }
        for (i, f) in features.iter().enumerate() {
            if f.iter().any(|(j, _)| *j >= n_features) {
                return Err(SspError::dimension(format!(
                    "example {i} has a feature index out of range"
                )));
            }
            if f.windows(2).any(|w| w[0].0 >= w[1].0) {
                return Err(SspError::config(format!(
                    "example {i} has non-ascending feature indices"
                )));
            }
        }
        Ok(Self {
            n_features,
            features,
            labels,
        })
    }

    pub fn from_dense(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let features = rows
            .iter()
            .map(|r| r.iter().cloned().enumerate().filter(|(_, v)| *v != 0.0).collect())
            .collect();
        Self::new(n, features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn sparse_row(&self, i: usize) -> &[(usize, f64)] {
        &self.features[i]
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        for &(j, v) in &self.features[i] {
            out[j] = v;
        }
        out
    }

    fn subset(&self, idx: &[usize]) -> Self {
        Self {
            n_features: self.n_features,
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Seeded shuffle, then the first `train_fraction` of examples for training.
    pub fn split_train_test(&self, train_fraction: f64, seed: u64) -> (Self, Self) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(RandomStream::new(seed).rng_mut());
        let cut = (train_fraction * self.len() as f64).round() as usize;
        (self.subset(&idx[..cut]), self.subset(&idx[cut..]))
    }
}

/// Thin constructor for `find x ∈ Y : Ax = b, Cx ≤ d`.
pub fn build_constrained_ls(
    a: Matrix,
    b: Vec<f64>,
    c: Matrix,
    d: Vec<f64>,
    y: SimpleSet,
    block_size: usize,
) -> Result<LinearFeasibilityProblem> {
    LinearFeasibilityProblem::new(a, b, c, d, y, block_size)
}

/// Gaussian `A`, `C` and a planted `x†`; `b = Ax†`, `d = Cx† + max(0, g)`
/// with `g` standard normal, so roughly half the inequalities are active.
pub struct PlantedSystem {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Matrix,
    pub d: Vec<f64>,
    pub solution: Vec<f64>,
}

pub fn planted_gaussian_system(m: usize, p: usize, n: usize, seed: u64) -> PlantedSystem {
    let mut s = RandomStream::new(seed);
    let a: Vec<f64> = (0..m * n).map(|_| s.standard_normal()).collect();
    let c: Vec<f64> = (0..p * n).map(|_| s.standard_normal()).collect();
    let solution: Vec<f64> = (0..n).map(|_| s.standard_normal()).collect();
    let a = Matrix::from_dense(m, n, a).expect("sizes agree");
    let c = Matrix::from_dense(p, n, c).expect("sizes agree");
    let b = a.mul_vec(&solution);
    let d = c
        .mul_vec(&solution)
        .into_iter()
        .map(|v| v + s.standard_normal().max(0.0))
        .collect();
    PlantedSystem { a, b, c, d, solution }
}

/// `min cᵀz s.t. Cz ≤ d, z ≥ 0` as the primal-dual feasibility system over
/// `x = (z, ν) ≥ 0`: `cᵀz + dᵀν = 0`, `Cz ≤ d`, `−Cᵀν ≤ c`.
pub fn build_lp_feasibility(cost: &[f64], c_lp: &Matrix, d_lp: &[f64]) -> Result<LinearFeasibilityProblem> {
    let (p, n) = (c_lp.nrows(), c_lp.ncols());
    if cost.len() != n || d_lp.len() != p {
        return Err(SspError::dimension(format!(
            "LP with C {p}x{n} needs cost of length {n} and rhs of length {p}"
        )));
    }
    let a_row: Vec<f64> = cost.iter().chain(d_lp).cloned().collect();
    let mut trip: Vec<(usize, usize, f64)> = c_lp.triplets();
    trip.extend(c_lp.triplets().into_iter().map(|(i, j, v)| (p + j, n + i, -v)));
    let stacked = Matrix::from_triplets(p + n, n + p, &trip)?;
    let (a, stacked) = if c_lp.is_sparse() {
        let a = Matrix::from_triplets(
            1,
            n + p,
            &a_row
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (0, j, *v))
                .collect::<Vec<_>>(),
        )?;
        (a, stacked)
    } else {
        (Matrix::from_dense(1, n + p, a_row)?, stacked.to_dense())
    };
    let rhs: Vec<f64> = d_lp.iter().chain(cost).cloned().collect();
    LinearFeasibilityProblem::new(a, vec![0.0], stacked, rhs, SimpleSet::NonnegativeOrthant, 1)
}

/// Random LP `min cᵀz s.t. Cz ≤ d, z ≥ 0` with `p` Gaussian rows that hold
/// strictly at `z = 1`, plus the cap `Σz ≤ 2n`.
pub fn random_bounded_lp(n: usize, p: usize, seed: u64) -> (Vec<f64>, Matrix, Vec<f64>) {
    let mut s = RandomStream::new(seed);
    let mut rows: Vec<Vec<f64>> = (0..p).map(|_| (0..n).map(|_| s.standard_normal()).collect()).collect();
    // interior point z = 1 with positive slack
    let mut d: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() + 0.5 + s.uniform()).collect();
    rows.push(vec![1.0; n]);
    d.push(2.0 * n as f64);
    let cost = (0..n).map(|_| s.standard_normal()).collect();
    (cost, Matrix::from_rows(&rows).expect("rectangular"), d)
}

/// Variable layout of the sparse SVM LP: `(w₊, w₋, d₊, d₋, u)`, all ≥ 0,
/// followed in the feasibility system by one dual variable per example.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SvmLpLayout {
    pub n_features: usize,
    pub n_examples: usize,
}

impl SvmLpLayout {
    pub fn lp_variables(&self) -> usize {
        2 * self.n_features + 2 + self.n_examples
    }

    pub fn system_variables(&self) -> usize {
        self.lp_variables() + self.n_examples
    }

    /// `(w, d, u)` from an LP (or feasibility-system) point.
    pub fn decode(&self, x: &[f64]) -> (Vec<f64>, f64, Vec<f64>) {
        let n = self.n_features;
        let w = (0..n).map(|j| x[j] - x[n + j]).collect();
        let d = x[2 * n] - x[2 * n + 1];
        let u = x[2 * n + 2..2 * n + 2 + self.n_examples].to_vec();
        (w, d, u)
    }

    /// LP point with positive and negative parts split.
    pub fn encode(&self, w: &[f64], d: f64, u: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.lp_variables());
        x.extend(w.iter().map(|v| v.max(0.0)));
        x.extend(w.iter().map(|v| (-v).max(0.0)));
        x.push(d.max(0.0));
        x.push((-d).max(0.0));
        x.extend_from_slice(u);
        x
    }

    pub fn cost(&self, lambda: f64) -> Vec<f64> {
        let mut c = vec![1.0; 2 * self.n_features];
        c.extend([0.0, 0.0]);
        c.extend(std::iter::repeat_n(lambda, self.n_examples));
        c
    }
}

/// `min λΣu_i + ‖w‖₁ s.t. y_i(wᵀz_i + d) ≥ 1 − u_i, u ≥ 0`, as an LP and
/// then as its primal-dual feasibility system.
pub fn build_sparse_svm_lp(data: &LabeledDataset, lambda: f64) -> Result<(LinearFeasibilityProblem, SvmLpLayout)> {
    let (cost, c_lp, d_lp, layout) = sparse_svm_lp(data, lambda)?;
    Ok((build_lp_feasibility(&cost, &c_lp, &d_lp)?, layout))
}

/// The raw LP `(cost, C, d)` of [`build_sparse_svm_lp`].
pub fn sparse_svm_lp(data: &LabeledDataset, lambda: f64) -> Result<(Vec<f64>, Matrix, Vec<f64>, SvmLpLayout)> {
    if data.is_empty() {
        return Err(SspError::config("empty dataset"));
    }
    if !(lambda > 0.0) {
        return Err(SspError::config("lambda must be positive"));
    }
    let layout = SvmLpLayout {
        n_features: data.n_features(),
        n_examples: data.len(),
    };
    let n = layout.n_features;
    // −y_i(z_iᵀ(w₊ − w₋) + d₊ − d₋) − u_i ≤ −1
    let mut trip = Vec::new();
    for i in 0..data.len() {
        let y = data.label(i);
        for &(j, v) in data.sparse_row(i) {
            trip.push((i, j, -y * v));
            trip.push((i, n + j, y * v));
        }
        trip.push((i, 2 * n, -y));
        trip.push((i, 2 * n + 1, y));
        trip.push((i, 2 * n + 2 + i, -1.0));
    }
    let c_lp = Matrix::from_triplets(data.len(), layout.lp_variables(), &trip)?;
    Ok((layout.cost(lambda), c_lp, vec![-1.0; data.len()], layout))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovarianceMode {
    /// One diagonal per class, feature-wise.
    ClassDependent,
    /// One value shared by every feature and both classes.
    ClassIndependent,
}

/// Diagonal uncertainty model. `positive`/`negative` hold per-feature
/// variances; the ellipsoid of example `i` has shape `Q_i = (ρ·Σ_{y_i})⁻¹`,
/// so `‖Q_i^{-1/2}w‖ = ‖(ρΣ)^{1/2}w‖` and `ρ = 0` is the nominal problem.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidModel {
    pub mode: CovarianceMode,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
    pub rho: f64,
}

impl EllipsoidModel {
    pub fn new(mode: CovarianceMode, positive: Vec<f64>, negative: Vec<f64>, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(SspError::config("rho must lie in [0, 1]"));
        }
        if positive.len() != negative.len() {
            return Err(SspError::dimension("class covariances differ in size"));
        }
        if positive.iter().chain(&negative).any(|v| !(*v >= 0.0)) {
            return Err(SspError::config("covariance diagonals must be nonnegative"));
        }
        Ok(Self {
            mode,
            positive,
            negative,
            rho,
        })
    }

    pub fn is_nominal(&self) -> bool {
        self.rho == 0.0
    }

    /// True when some scaled diagonal entry is zero while `ρ > 0`.
    pub fn is_degenerate(&self) -> bool {
        !self.is_nominal() && self.positive.iter().chain(&self.negative).any(|v| *v == 0.0)
    }

    /// Diagonal of `Q_i` for label `y`; `None` in the nominal case.
    pub fn shape_for(&self, y: f64) -> Result<Option<Vec<f64>>> {
        if self.is_nominal() {
            return Ok(None);
        }
        let var = if y > 0.0 { &self.positive } else { &self.negative };
        if var.contains(&0.0) {
            return Err(SspError::config(
                "zero variance in the scaled covariance; the SOC constraint is undefined",
            ));
        }
        Ok(Some(var.iter().map(|v| 1.0 / (self.rho * v)).collect()))
    }
}

/// Per-class feature variances (class-dependent) or the pooled within-class
/// variance replicated over all features (class-independent).
pub fn covariance_from_data(data: &LabeledDataset, mode: CovarianceMode, rho: f64) -> Result<EllipsoidModel> {
    let n = data.n_features();
    let rows: Vec<Vec<f64>> = (0..data.len()).map(|i| data.dense_row(i)).collect();
    let class_idx = |y: f64| -> Vec<usize> { (0..data.len()).filter(|&i| data.label(i) == y).collect() };
    let (pos, neg) = (class_idx(1.0), class_idx(-1.0));
    let mean = |idx: &[usize]| -> Vec<f64> {
        let mut m = vec![0.0; n];
        for &i in idx {
            for j in 0..n {
                m[j] += rows[i][j];
            }
        }
        m.iter_mut().for_each(|v| *v /= idx.len() as f64);
        m
    };
    let sq_dev = |idx: &[usize], mu: &[f64]| -> Vec<f64> {
        let mut s = vec![0.0; n];
        for &i in idx {
            for j in 0..n {
                s[j] += (rows[i][j] - mu[j]).powi(2);
            }
        }
        s
    };
    match mode {
        CovarianceMode::ClassDependent => {
            if pos.len() < 2 || neg.len() < 2 {
                return Err(SspError::config(
                    "class-dependent covariance needs at least two examples of each class",
                ));
            }
            let var = |idx: &[usize]| -> Vec<f64> {
                let s = sq_dev(idx, &mean(idx));
                s.into_iter().map(|v| v / (idx.len() - 1) as f64).collect()
            };
            EllipsoidModel::new(mode, var(&pos), var(&neg), rho)
        }
        CovarianceMode::ClassIndependent => {
            let classes: Vec<&Vec<usize>> = [&pos, &neg].into_iter().filter(|c| !c.is_empty()).collect();
            let dof = data.len().saturating_sub(classes.len());
            if dof == 0 || n == 0 {
                return Err(SspError::config("not enough data for a pooled variance"));
            }
            let total: f64 = classes.iter().map(|c| sq_dev(c, &mean(c)).iter().sum::<f64>()).sum();
            let pooled = total / (dof as f64 * n as f64);
            EllipsoidModel::new(mode, vec![pooled; n], vec![pooled; n], rho)
        }
    }
}

/// Variable layout `x = (w, d, u)` of the robust SVM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RobustSvmLayout {
    pub n_features: usize,
    pub n_examples: usize,
}

impl RobustSvmLayout {
    pub fn dimension(&self) -> usize {
        self.n_features + 1 + self.n_examples
    }

    pub fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], f64, &'a [f64]) {
        let n = self.n_features;
        (&x[..n], x[n], &x[n + 1..])
    }
}

/// `f = λΣu_i` (gradient step), `g = ‖w‖₁` (prox), single objective index.
struct RobustSvmObjective {
    layout: RobustSvmLayout,
    lambda: f64,
}

impl ObjectiveFamily for RobustSvmObjective {
    fn dimension(&self) -> usize {
        self.layout.dimension()
    }

    fn subgradient(&self, _idx: usize, _x: &[f64], out: &mut [f64]) {
        let n = self.layout.n_features;
        out[..=n].iter_mut().for_each(|v| *v = 0.0);
        out[n + 1..].iter_mut().for_each(|v| *v = self.lambda);
    }

    fn prox(&self, _idx: usize, alpha: f64, x: &mut [f64]) {
        soft_threshold_in_place(&mut x[..self.layout.n_features], alpha);
    }

    fn value(&self, _idx: usize, x: &[f64]) -> Option<f64> {
        let (w, _, u) = self.layout.split(x);
        Some(self.lambda * u.iter().sum::<f64>() + w.iter().map(|v| v.abs()).sum::<f64>())
    }
}

/// Index `i < N`: margin `1 − u_i − y_i(wᵀz_i + d) ≤ 0`; index `N + i`: the
/// SOC version with `‖Q_i^{-1/2}w‖` added.
struct RobustSvmConstraints {
    layout: RobustSvmLayout,
    data: Vec<SocDatum>,
    robust: bool,
    bound: f64,
}

impl ConstraintFamily for RobustSvmConstraints {
    fn dimension(&self) -> usize {
        self.layout.dimension()
    }

    fn eval(&self, idx: usize, x: &[f64], grad: &mut [f64]) -> f64 {
        let n_ex = self.layout.n_examples;
        let n = self.layout.n_features;
        let (w, d, u) = self.layout.split(x);
        grad.iter_mut().for_each(|v| *v = 0.0);
        let i = idx % n_ex;
        let datum = &self.data[i];
        if idx < n_ex || !self.robust {
            for (g, zj) in grad[..n].iter_mut().zip(&datum.z) {
                *g = -datum.y * zj;
            }
            grad[n] = -datum.y;
            grad[n + 1 + i] = -1.0;
            1.0 - u[i] - datum.y * (dot(w, &datum.z) + d)
        } else {
            let e = soc_eval_subgrad(w, d, u[i], datum);
            grad[..n].copy_from_slice(&e.grad_w);
            grad[n] = e.grad_d;
            grad[n + 1 + i] = e.grad_u;
            e.value
        }
    }

    fn subgradient_bound(&self) -> Option<f64> {
        Some(self.bound)
    }
}

/// `min λΣu_i + ‖w‖₁` subject to the N margin constraints and, when `ρ > 0`,
/// the N second-order cone constraints; `Y = {u ≥ 0}`.
pub fn build_robust_svm(
    data: &LabeledDataset,
    lambda: f64,
    ellipsoids: &EllipsoidModel,
) -> Result<(CompositeProblem, RobustSvmLayout)> {
    if data.is_empty() {
        return Err(SspError::config("empty dataset"));
    }
    if !(lambda > 0.0) {
        return Err(SspError::config("lambda must be positive"));
    }
    if ellipsoids.positive.len() != data.n_features() {
        return Err(SspError::dimension("ellipsoid model does not match feature count"));
    }
    let layout = RobustSvmLayout {
        n_features: data.n_features(),
        n_examples: data.len(),
    };
    let robust = !ellipsoids.is_nominal();
    let mut soc = Vec::with_capacity(data.len());
    let mut bound: f64 = 0.0;
    for i in 0..data.len() {
        let y = data.label(i);
        let z = data.dense_row(i);
        let q = ellipsoids.shape_for(y)?.unwrap_or_else(|| vec![1.0; data.n_features()]);
        let norm_term = if robust {
            q.iter().map(|v| 1.0 / v.sqrt()).fold(0.0, f64::max)
        } else {
            0.0
        };
        bound = bound.max(((norm(&z) + norm_term).powi(2) + 2.0).sqrt());
        soc.push(SocDatum::new(z, y, q)?);
    }
    let n_constraints = if robust { 2 * data.len() } else { data.len() };
    let objective = RobustSvmObjective { layout, lambda };
    let constraints = RobustSvmConstraints {
        layout,
        data: soc,
        robust,
        bound,
    };
    // bounded subgradients of f and g: B² = 2λ²N + 2n, L = 0
    let b = (2.0 * lambda * lambda * data.len() as f64 + 2.0 * data.n_features() as f64).sqrt();
    let u_coords: Vec<usize> = (layout.n_features + 1..layout.dimension()).collect();
    let problem = CompositeProblem::new(
        Arc::new(objective),
        Arc::new(Categorical::uniform(1)?),
        SimpleSet::NonnegativeCoords(u_coords),
    )?
    .with_constraints(Arc::new(constraints), Arc::new(Categorical::uniform(n_constraints)?))?
    .with_constants(AssumptionConstants::new(0.0, b, 0.0, bound, None)?)?;
    Ok((problem, layout))
}

/// Minimizer of `y(wᵀz̄ + d)` over the ellipsoid around `z` and the minimal value.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstCasePoint {
    pub point: Vec<f64>,
    pub value: f64,
    /// `w = 0`: every point of the ellipsoid attains the value.
    pub degenerate: bool,
}

pub fn worst_case_point(w: &[f64], d: f64, z: &[f64], y: f64, q_diag: &[f64]) -> WorstCasePoint {
    // wᵀQ⁻¹w
    let wqw: f64 = w.iter().zip(q_diag).map(|(wi, qi)| wi * wi / qi).sum();
    if wqw <= 0.0 {
        return WorstCasePoint {
            point: z.to_vec(),
            value: y * d,
            degenerate: true,
        };
    }
    let s = wqw.sqrt();
    let point = z
        .iter()
        .zip(w)
        .zip(q_diag)
        .map(|((zi, wi), qi)| zi - y * wi / qi / s)
        .collect();
    WorstCasePoint {
        point,
        value: y * (dot(w, z) + d) - s,
        degenerate: false,
    }
}

/// How the worst-case rule compares `|wᵀz + d|` with the ellipsoid extent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum WorstCaseTest {
    /// `|wᵀz + d| < ‖Q^{-1/2}w‖²`
    #[default]
    Squared,
    /// `|wᵀz + d| < ‖Q^{-1/2}w‖`, the exact intersection test.
    Unsquared,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassifyRule {
    Ordinary,
    WorstCase(WorstCaseTest),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Classification {
    /// `sign(wᵀz + d)`, with 0 mapped to +1.
    pub label: f64,
    pub on_boundary: bool,
    /// Worst-case rule only: the ellipsoid around `z` meets the hyperplane.
    pub worst_case_flag: bool,
}

pub fn classify(rule: ClassifyRule, w: &[f64], d: f64, z: &[f64], q_diag: Option<&[f64]>) -> Result<Classification> {
    let score = dot(w, z) + d;
    let mut out = Classification {
        label: if score < 0.0 { -1.0 } else { 1.0 },
        on_boundary: score == 0.0,
        worst_case_flag: false,
    };
    if let ClassifyRule::WorstCase(test) = rule {
        let q = q_diag.ok_or_else(|| SspError::config("worst-case rule needs an ellipsoid shape"))?;
        let extent: f64 = w.iter().zip(q).map(|(wi, qi)| wi * wi / qi).sum::<f64>().sqrt();
        let threshold = match test {
            WorstCaseTest::Squared => extent * extent,
            WorstCaseTest::Unsquared => extent,
        };
        out.worst_case_flag = score.abs() < threshold;
    }
    Ok(out)
}

pub fn ordinary_errors(w: &[f64], d: f64, data: &LabeledDataset) -> usize {
    (0..data.len())
        .filter(|&i| {
            let c = classify(ClassifyRule::Ordinary, w, d, &data.dense_row(i), None).expect("no shape needed");
            c.label != data.label(i)
        })
        .count()
}

/// Examples whose uncertainty ellipsoid is flagged by the worst-case rule.
/// Zero for a nominal model.
pub fn worst_case_errors(
    w: &[f64],
    d: f64,
    data: &LabeledDataset,
    ellipsoids: &EllipsoidModel,
    test: WorstCaseTest,
) -> Result<usize> {
    let mut count = 0;
    for i in 0..data.len() {
        let Some(q) = ellipsoids.shape_for(data.label(i))? else {
            return Ok(0);
        };
        let c = classify(ClassifyRule::WorstCase(test), w, d, &data.dense_row(i), Some(&q))?;
        count += usize::from(c.worst_case_flag);
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_feasibility_shapes() {
        let c = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let p = build_lp_feasibility(&[1.0, 1.0, 1.0], &c, &[4.0, 5.0]).unwrap();
        assert_eq!(p.dimension(), 5);
        assert_eq!((p.a().nrows(), p.a().ncols()), (1, 5));
        assert_eq!((p.c().nrows(), p.c().ncols()), (5, 5));
        // second block row is [0 | −Cᵀ]
        assert_eq!(p.c().get(2 + 1, 3), -2.0);
        assert_eq!(p.c().get(2, 4), 0.0);
        assert_eq!(p.d(), &[4.0, 5.0, 1.0, 1.0, 1.0]);
        assert!(build_lp_feasibility(&[1.0], &c, &[4.0, 5.0]).is_err());
    }

    #[test]
    fn lp_one_variable_solution() {
        // min z s.t. −z ≤ −1, z ≥ 0: optimum z = 1, dual ν = 1
        let c = Matrix::from_rows(&[vec![-1.0]]).unwrap();
        let p = build_lp_feasibility(&[1.0], &c, &[-1.0]).unwrap();
        let x = [1.0, 1.0];
        assert_eq!(p.eq_residual(&x), 0.0);
        assert_eq!(p.ineq_residual(&x), 0.0);
        assert!(p.simple_set().contains(&x));
    }

    #[test]
    fn svm_lp_encoding_shapes() {
        let data = LabeledDataset::from_dense(
            &[
                vec![1.0, 0.0, 2.0],
                vec![0.0, 1.0, 0.0],
                vec![1.0, 1.0, 1.0],
                vec![0.5, 0.0, 0.0],
            ],
            vec![1.0, -1.0, 1.0, -1.0],
        )
        .unwrap();
        let (p, layout) = build_sparse_svm_lp(&data, 0.1).unwrap();
        assert_eq!(layout.lp_variables(), 12);
        assert_eq!(p.dimension(), 16);
        assert_eq!(p.c().nrows(), 4 + 12);
        assert!(build_sparse_svm_lp(&data, 0.0).is_err());
        let empty = LabeledDataset::new(3, vec![], vec![]).unwrap();
        assert!(build_sparse_svm_lp(&empty, 0.1).is_err());
    }

    #[test]
    fn svm_lp_constraint_matches_margin() {
        let data = LabeledDataset::from_dense(&[vec![2.0, -1.0]], vec![-1.0]).unwrap();
        let (_, c, d, layout) = sparse_svm_lp(&data, 0.3).unwrap();
        let (w, b, u) = (vec![0.5, -1.5], 0.25, vec![0.7]);
        let x = layout.encode(&w, b, &u);
        let lhs = c.row(0).dot(&x) - d[0];
        let direct = 1.0 - u[0] - data.label(0) * (dot(&w, &data.dense_row(0)) + b);
        assert!((lhs - direct).abs() < 1e-14);
    }

    #[test]
    fn worst_case_examples() {
        let wc = worst_case_point(&[1.0, 0.0], 0.0, &[0.0, 0.0], 1.0, &[1.0, 1.0]);
        assert_eq!(wc.point, vec![-1.0, 0.0]);
        assert_eq!(wc.value, -1.0);
        let wc = worst_case_point(&[0.0, 0.0], 0.5, &[3.0, 1.0], -1.0, &[1.0, 1.0]);
        assert!(wc.degenerate);
        assert_eq!(wc.value, -0.5);
    }

    #[test]
    fn classify_examples() {
        let c = classify(ClassifyRule::Ordinary, &[1.0, 0.0], -1.0, &[2.0, 0.0], None).unwrap();
        assert_eq!((c.label, c.on_boundary), (1.0, false));
        let c = classify(ClassifyRule::Ordinary, &[1.0, 0.0], -1.0, &[1.0, 0.0], None).unwrap();
        assert_eq!((c.label, c.on_boundary), (1.0, true));
        let q = [1.0, 1.0];
        let o = classify(ClassifyRule::Ordinary, &[1.0, 0.0], 0.0, &[0.5, 0.0], None).unwrap();
        let c = classify(
            ClassifyRule::WorstCase(WorstCaseTest::Squared),
            &[1.0, 0.0],
            0.0,
            &[0.5, 0.0],
            Some(&q),
        )
        .unwrap();
        assert_eq!(o.label, 1.0);
        assert!(c.worst_case_flag);
        assert!(classify(
            ClassifyRule::WorstCase(WorstCaseTest::Squared),
            &[1.0],
            0.0,
            &[0.5],
            None
        )
        .is_err());
        // the two tests disagree when the extent is below one
        let w = [0.5, 0.0];
        let sq = classify(
            ClassifyRule::WorstCase(WorstCaseTest::Squared),
            &w,
            0.0,
            &[0.8, 0.0],
            Some(&q),
        )
        .unwrap();
        let un = classify(
            ClassifyRule::WorstCase(WorstCaseTest::Unsquared),
            &w,
            0.0,
            &[0.8, 0.0],
            Some(&q),
        )
        .unwrap();
        assert!(!sq.worst_case_flag && un.worst_case_flag);
    }

    #[test]
    fn covariance_modes() {
        let data = LabeledDataset::from_dense(
            &[vec![1.0, 2.0], vec![1.0, 2.0], vec![-1.0, 0.0], vec![-1.0, 0.0]],
            vec![1.0, 1.0, -1.0, -1.0],
        )
        .unwrap();
        let m = covariance_from_data(&data, CovarianceMode::ClassDependent, 0.5).unwrap();
        assert_eq!(m.positive, vec![0.0, 0.0]);
        assert!(m.is_degenerate());
        assert!(m.shape_for(1.0).is_err());

        let data = LabeledDataset::from_dense(
            &[vec![1.0, 2.0], vec![3.0, 2.5], vec![-1.0, 0.0], vec![-2.0, 4.0]],
            vec![1.0, 1.0, -1.0, -1.0],
        )
        .unwrap();
        let m = covariance_from_data(&data, CovarianceMode::ClassIndependent, 0.3).unwrap();
        assert!(m.positive.iter().chain(&m.negative).all(|v| *v == m.positive[0]));

        let one_class = LabeledDataset::from_dense(&[vec![1.0], vec![2.0]], vec![1.0, 1.0]).unwrap();
        assert!(covariance_from_data(&one_class, CovarianceMode::ClassDependent, 0.1).is_err());
    }

    #[test]
    fn nominal_model_emits_linear_constraints_only() {
        let data = LabeledDataset::from_dense(&[vec![1.0], vec![-1.0]], vec![1.0, -1.0]).unwrap();
        let model = EllipsoidModel::new(CovarianceMode::ClassIndependent, vec![1.0], vec![1.0], 0.0).unwrap();
        let (p, _) = build_robust_svm(&data, 0.1, &model).unwrap();
        assert_eq!(p.constraints().unwrap().sampler.len(), Some(2));
        let model = EllipsoidModel { rho: 0.5, ..model };
        let (p, _) = build_robust_svm(&data, 0.1, &model).unwrap();
        assert_eq!(p.constraints().unwrap().sampler.len(), Some(4));
    }

    #[test]
    fn robust_constraint_with_identity_shape() {
        // ρΣ = I: h at w = (1,0), d = 0, u = 0, z = (2,0), y = 1 is 0
        let data = LabeledDataset::from_dense(&[vec![2.0, 0.0], vec![-2.0, 0.0]], vec![1.0, -1.0]).unwrap();
        let model = EllipsoidModel::new(CovarianceMode::ClassIndependent, vec![1.0; 2], vec![1.0; 2], 1.0).unwrap();
        let (p, _) = build_robust_svm(&data, 0.1, &model).unwrap();
        let x = [1.0, 0.0, 0.0, 0.0, 0.0];
        let s = p.constraint_at(2, &x).unwrap();
        assert_eq!(s.value, 0.0);
        let s = p.constraint_at(0, &x).unwrap();
        assert_eq!(s.value, -1.0);
    }

    #[test]
    fn split_is_seeded_and_complete() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 + 1.0]).collect();
        let labels = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let data = LabeledDataset::from_dense(&rows, labels).unwrap();
        let (tr, te) = data.split_train_test(0.8, 7);
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert_eq!(data.split_train_test(0.8, 7), (tr, te));
    }

    #[test]
    fn dataset_validation() {
        assert!(LabeledDataset::new(2, vec![vec![(0, 1.0)]], vec![0.0]).is_err());
        assert!(LabeledDataset::new(2, vec![vec![(2, 1.0)]], vec![1.0]).is_err());
        assert!(LabeledDataset::new(3, vec![vec![(1, 1.0), (0, 1.0)]], vec![1.0]).is_err());
    }
}
