use std::sync::Arc;

use proptest::prelude::*;

use ssp_core::builders::{
    build_robust_svm, covariance_from_data, sparse_svm_lp, worst_case_point, CovarianceMode, LabeledDataset,
    SvmLpLayout,
};
use ssp_core::linalg::Matrix;
use ssp_core::ls::{ssp_ls_step_with, LinearFeasibilityProblem, LsState};
use ssp_core::oracles::{finite_diff_subgradient_check, oracle_feasibility_cyclic_problem};
use ssp_core::problem::{AffineConstraints, CompositeProblem, ObjectiveFamily};
use ssp_core::prox::{polyak_step, soc_eval_subgrad, soft_threshold, soft_threshold_in_place, SimpleSet, SocDatum};
use ssp_core::rng::{Categorical, RandomStream};
use ssp_core::ssp::{ssp_step_with, SspState};
use ssp_core::stepsize::{PolynomialDecay, StepsizeRule};

fn ip(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn gaussian(s: &mut RandomStream, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * s.standard_normal()).collect()
}

fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-10.0f64..10.0, n)
}

fn set_strategy(n: usize) -> impl Strategy<Value = SimpleSet> {
    let nonzero = || vec_strategy(n).prop_filter("nonzero normal", |c| ip(c, c) > 1e-3);
    prop_oneof![
        Just(SimpleSet::WholeSpace),
        Just(SimpleSet::NonnegativeOrthant),
        (vec_strategy(n), proptest::collection::vec(0.0f64..5.0, n)).prop_map(|(l, w)| {
            let u = l.iter().zip(&w).map(|(a, b)| a + b).collect();
            SimpleSet::Box { lower: l, upper: u }
        }),
        (nonzero(), -5.0f64..5.0).prop_map(|(c, d)| SimpleSet::Halfspace { c, d }),
        (nonzero(), -5.0f64..5.0).prop_map(|(c, d)| SimpleSet::Hyperplane { c, d }),
        proptest::collection::vec(any::<bool>(), n)
            .prop_map(|m| SimpleSet::NonnegativeCoords((0..m.len()).filter(|&i| m[i]).collect())),
    ]
}

proptest! {
    #[test]
    fn projection_is_optimal(set in set_strategy(5), v in vec_strategy(5), w in vec_strategy(5)) {
        let p = set.project(&v);
        prop_assert!(set.contains(&p));
        let y = set.project(&w);
        let g: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        let h: Vec<f64> = y.iter().zip(&p).map(|(a, b)| a - b).collect();
        prop_assert!(ip(&g, &h) <= 1e-9);
        // idempotent
        let pp = set.project(&p);
        for (a, b) in pp.iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn polyak_exact_for_affine(c in vec_strategy(6), v in vec_strategy(6), excess in 0.01f64..10.0) {
        prop_assume!(ip(&c, &c) > 1e-2);
        let d = ip(&c, &v) - excess;
        let z = polyak_step(&v, excess, &c, 1.0).unwrap();
        prop_assert!((ip(&c, &z) - d).abs() <= 1e-9 * (1.0 + d.abs()));
    }

    #[test]
    fn polyak_is_fejer(c in vec_strategy(4), v in vec_strategy(4), y in vec_strategy(4), beta in 0.01f64..1.99) {
        prop_assume!(ip(&c, &c) > 1e-2);
        // halfspace through y with some slack, so y is feasible
        let d = ip(&c, &y) + 0.5;
        let h = (ip(&c, &v) - d).max(0.0);
        let z = polyak_step(&v, h, &c, beta).unwrap();
        let dz: f64 = z.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        let dv: f64 = v.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        prop_assert!(dz <= dv + 1e-9);
    }

    #[test]
    fn soft_threshold_optimality(x in vec_strategy(6), gamma in 0.0f64..3.0, weight in 0.0f64..3.0) {
        let p = soft_threshold(&x, gamma, weight);
        let t = gamma * weight;
        for (pi, xi) in p.iter().zip(&x) {
            if *pi == 0.0 {
                prop_assert!(xi.abs() <= t + 1e-12);
            } else {
                prop_assert!((pi - xi + t * pi.signum()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn encoding_round_trip(w in vec_strategy(4), d in -5.0f64..5.0, u in proptest::collection::vec(0.0f64..5.0, 3)) {
        let layout = SvmLpLayout { n_features: 4, n_examples: 3 };
        let x = layout.encode(&w, d, &u);
        let (w2, d2, u2) = layout.decode(&x);
        prop_assert_eq!(&w2, &w);
        prop_assert_eq!(d2, d);
        prop_assert_eq!(&u2, &u);
        prop_assert_eq!(layout.encode(&w2, d2, &u2), x);
    }
}

#[test]
fn soc_subgradient_matches_finite_differences() {
    let mut s = RandomStream::new(41);
    for _ in 0..100 {
        let n = 4;
        let z = gaussian(&mut s, n, 2.0);
        let q: Vec<f64> = (0..n).map(|_| 0.2 + s.uniform()).collect();
        let y = if s.uniform() < 0.5 { 1.0 } else { -1.0 };
        let datum = SocDatum::new(z, y, q).unwrap();
        let w = gaussian(&mut s, n, 1.0);
        if datum.scaled_norm(&w) <= 0.1 {
            continue;
        }
        let (d, u) = (s.standard_normal(), s.uniform());
        let e = soc_eval_subgrad(&w, d, u, &datum);
        let mut grad = e.grad_w.clone();
        grad.extend([e.grad_d, e.grad_u]);
        let mut x = w.clone();
        x.extend([d, u]);
        let f = |p: &[f64]| soc_eval_subgrad(&p[..n], p[n], p[n + 1], &datum).value;
        assert!(finite_diff_subgradient_check(&f, &grad, &x, 1e-6) <= 1e-5);
    }
}

#[test]
fn l1_gradient_matches_finite_differences() {
    let x = [0.5, -1.3, 2.2, -0.4];
    let g: Vec<f64> = x.iter().map(|v: &f64| v.signum()).collect();
    let f = |p: &[f64]| p.iter().map(|v| v.abs()).sum::<f64>();
    assert!(finite_diff_subgradient_check(&f, &g, &x, 1e-5) <= 1e-6);
}

#[test]
fn worst_case_value_is_attained() {
    let mut s = RandomStream::new(5);
    for _ in 0..100 {
        let w = gaussian(&mut s, 3, 1.0);
        let z = gaussian(&mut s, 3, 1.0);
        let q: Vec<f64> = (0..3).map(|_| 0.1 + s.uniform()).collect();
        let d = s.standard_normal();
        let y = if s.uniform() < 0.5 { 1.0 } else { -1.0 };
        let wc = worst_case_point(&w, d, &z, y, &q);
        assert!((y * (ip(&w, &wc.point) + d) - wc.value).abs() <= 1e-12);
        // the point is on the ellipsoid boundary
        let r: f64 = wc
            .point
            .iter()
            .zip(&z)
            .zip(&q)
            .map(|((p, c), qi)| qi * (p - c).powi(2))
            .sum();
        assert!((r - 1.0).abs() <= 1e-12);
    }
}

fn random_dataset(s: &mut RandomStream, n: usize, per_class: usize) -> LabeledDataset {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for y in [1.0, -1.0] {
        for _ in 0..per_class {
            rows.push(
                (0..n)
                    .map(|j| s.standard_normal() + if j == 0 { y } else { 0.0 })
                    .collect::<Vec<_>>(),
            );
            labels.push(y);
        }
    }
    LabeledDataset::from_dense(&rows, labels).unwrap()
}

#[test]
fn class_dependent_variance_matches_two_pass() {
    let mut s = RandomStream::new(77);
    let data = random_dataset(&mut s, 4, 9);
    let model = covariance_from_data(&data, CovarianceMode::ClassDependent, 0.5).unwrap();
    for (label, got) in [(1.0, &model.positive), (-1.0, &model.negative)] {
        let rows: Vec<Vec<f64>> = (0..data.len())
            .filter(|&i| data.label(i) == label)
            .map(|i| data.dense_row(i))
            .collect();
        for j in 0..4 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (rows.len() - 1) as f64;
            assert!((got[j] - var).abs() <= 1e-12);
        }
    }
    let pooled = covariance_from_data(&data, CovarianceMode::ClassIndependent, 0.5).unwrap();
    assert!(pooled.positive.iter().all(|v| *v == pooled.positive[0] && *v > 0.0));
}

#[test]
fn robust_constraints_imply_nominal_ones() {
    let mut s = RandomStream::new(8);
    let data = random_dataset(&mut s, 3, 6);
    let model = covariance_from_data(&data, CovarianceMode::ClassDependent, 0.4).unwrap();
    let (problem, layout) = build_robust_svm(&data, 0.2, &model).unwrap();
    let set = problem.constraints().unwrap();
    let bound = set.family.subgradient_bound().unwrap();
    let n_ex = data.len();
    for _ in 0..200 {
        let mut x = gaussian(&mut s, layout.dimension(), 2.0);
        problem.simple_set().project_in_place(&mut x);
        for i in 0..n_ex {
            let lin = problem.constraint_at(i, &x).unwrap();
            let soc = problem.constraint_at(n_ex + i, &x).unwrap();
            assert!(soc.value >= lin.value - 1e-12);
            for c in [&lin, &soc] {
                assert!(ip(&c.subgradient, &c.subgradient).sqrt() <= bound + 1e-12);
            }
        }
    }
}

#[test]
fn svm_lp_rows_have_one_per_example() {
    let mut s = RandomStream::new(3);
    let data = random_dataset(&mut s, 5, 4);
    let (cost, c, d, layout) = sparse_svm_lp(&data, 0.3).unwrap();
    assert_eq!(cost.len(), layout.lp_variables());
    assert_eq!(c.nrows(), data.len());
    assert!(d.iter().all(|v| *v == -1.0));
}

#[test]
fn frobenius_sampling_frequency() {
    let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
    let p = LinearFeasibilityProblem::new(a, vec![0.0, 0.0], Matrix::zeros(0, 2), vec![], SimpleSet::WholeSpace, 1)
        .unwrap();
    let mut s = RandomStream::new(12);
    let draws = 100_000;
    let hits = (0..draws).filter(|_| p.draw_indices(&mut s).0 == Some(1)).count();
    let freq = hits as f64 / draws as f64;
    assert!((freq - 0.8).abs() <= 0.01, "{freq}");
}

#[test]
fn objective_and_constraint_draws_are_independent() {
    let mut s = RandomStream::new(99);
    let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let c = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, -1.0]]).unwrap();
    let p = LinearFeasibilityProblem::new(a, vec![0.0; 3], c, vec![0.0; 4], SimpleSet::WholeSpace, 1).unwrap();
    let draws = 60_000;
    let mut table = [[0.0f64; 4]; 3];
    for _ in 0..draws {
        let (z, x) = p.draw_indices(&mut s);
        table[z.unwrap()][x.unwrap()] += 1.0;
    }
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..4).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let mut chi2 = 0.0;
    for i in 0..3 {
        for j in 0..4 {
            let e = rows[i] * cols[j] / draws as f64;
            chi2 += (table[i][j] - e).powi(2) / e;
        }
    }
    // 6 degrees of freedom, p = 0.001
    assert!(chi2 < 22.46, "chi² = {chi2}");
}

/// `f(x, i) = ½(a_iᵀx − b_i)²`, `g = λ‖x‖₁`.
struct LassoRows {
    rows: Vec<Vec<f64>>,
    b: Vec<f64>,
    lambda: f64,
}

impl ObjectiveFamily for LassoRows {
    fn dimension(&self) -> usize {
        self.rows[0].len()
    }

    fn subgradient(&self, idx: usize, x: &[f64], out: &mut [f64]) {
        let r = ip(&self.rows[idx], x) - self.b[idx];
        for (o, a) in out.iter_mut().zip(&self.rows[idx]) {
            *o = r * a;
        }
    }

    fn prox(&self, _idx: usize, alpha: f64, x: &mut [f64]) {
        soft_threshold_in_place(x, alpha * self.lambda);
    }
}

#[test]
fn ssp_step_matches_transcription() {
    let (n, m, p) = (5, 8, 6);
    let mut s = RandomStream::new(2024);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| gaussian(&mut s, n, 1.0)).collect();
    let b = gaussian(&mut s, m, 1.0);
    let crow: Vec<Vec<f64>> = (0..p).map(|_| gaussian(&mut s, n, 1.0)).collect();
    let d: Vec<f64> = (0..p).map(|_| s.uniform() - 0.5).collect();
    let (lo, hi) = (vec![-1.0; n], vec![1.5; n]);
    let lambda = 0.3;
    let beta = 1.7;
    let problem = CompositeProblem::new(
        Arc::new(LassoRows {
            rows: rows.clone(),
            b: b.clone(),
            lambda,
        }),
        Arc::new(Categorical::uniform(m).unwrap()),
        SimpleSet::boxed(lo.clone(), hi.clone()).unwrap(),
    )
    .unwrap()
    .with_constraints(
        Arc::new(AffineConstraints::new(Matrix::from_rows(&crow).unwrap(), d.clone()).unwrap()),
        Arc::new(Categorical::uniform(p).unwrap()),
    )
    .unwrap();
    let rule = PolynomialDecay::new(0.4, 0.5, 0.0).unwrap();
    let x0 = gaussian(&mut s, n, 1.0);
    let mut state = SspState::new(&problem, &x0, rule.default_averaging()).unwrap();
    let mut x: Vec<f64> = x0.iter().enumerate().map(|(i, v)| v.clamp(lo[i], hi[i])).collect();
    for k in 0..100 {
        let (zeta, xi) = problem.draw_indices(&mut s);
        ssp_step_with(&mut state, &problem, &rule, beta, zeta, xi).unwrap();

        let alpha = 0.4 / ((k + 1) as f64).sqrt();
        let r = ip(&rows[zeta], &x) - b[zeta];
        let mut v: Vec<f64> = (0..n).map(|i| x[i] - alpha * r * rows[zeta][i]).collect();
        for vi in v.iter_mut() {
            let t = alpha * lambda;
            *vi = if *vi > t {
                *vi - t
            } else if *vi < -t {
                *vi + t
            } else {
                0.0
            };
        }
        let c = &crow[xi.unwrap()];
        let h = ip(c, &v) - d[xi.unwrap()];
        if h > 0.0 {
            let cc = ip(c, c);
            for i in 0..n {
                v[i] -= beta * h / cc * c[i];
            }
        }
        x = (0..n).map(|i| v[i].max(lo[i]).min(hi[i])).collect();
        for (a, b) in x.iter().zip(&state.x) {
            assert!((a - b).abs() <= 1e-12, "step {k}");
        }
    }
}

#[test]
fn ssp_ls_step_matches_transcription() {
    let (n, m, p, block) = (10, 12, 8, 3);
    let mut s = RandomStream::new(77);
    let rows: Vec<Vec<f64>> = (0..m).map(|_| gaussian(&mut s, n, 1.0)).collect();
    let b = gaussian(&mut s, m, 1.0);
    let crow: Vec<Vec<f64>> = (0..p).map(|_| gaussian(&mut s, n, 1.0)).collect();
    let d = gaussian(&mut s, p, 1.0);
    let (delta, beta) = (1.5, 1.3);
    let problem = LinearFeasibilityProblem::new(
        Matrix::from_rows(&rows).unwrap(),
        b.clone(),
        Matrix::from_rows(&crow).unwrap(),
        d.clone(),
        SimpleSet::NonnegativeOrthant,
        block,
    )
    .unwrap();
    let x0 = gaussian(&mut s, n, 1.0);
    let mut state = LsState::new(&problem, &x0).unwrap();
    let mut x: Vec<f64> = x0.iter().map(|v| v.max(0.0)).collect();
    for k in 0..200 {
        let (zeta, xi) = problem.draw_indices(&mut s);
        ssp_ls_step_with(&mut state, &problem, delta, beta, zeta, xi).unwrap();

        let zeta = zeta.unwrap();
        let blk = zeta * block..(zeta * block + block).min(m);
        let mut w = vec![0.0; n];
        let mut rr = 0.0;
        for i in blk {
            let r = ip(&rows[i], &x) - b[i];
            rr += r * r;
            for j in 0..n {
                w[j] += r * rows[i][j];
            }
        }
        let ww = ip(&w, &w);
        let alpha = if ww > 0.0 { delta * rr / ww } else { 0.0 };
        let mut v: Vec<f64> = (0..n).map(|j| x[j] - alpha * w[j]).collect();
        let c = &crow[xi.unwrap()];
        let h = ip(c, &v) - d[xi.unwrap()];
        if h > 0.0 {
            let cc = ip(c, c);
            for j in 0..n {
                v[j] -= beta * h / cc * c[j];
            }
        }
        x = v.iter().map(|t| t.max(0.0)).collect();
        for (a, b) in x.iter().zip(&state.x) {
            assert!((a - b).abs() <= 1e-12, "step {k}");
        }
    }
}

#[test]
fn cyclic_oracle_solves_planted_problem() {
    let sys = ssp_core::builders::planted_gaussian_system(20, 20, 30, 6);
    let problem = LinearFeasibilityProblem::new(sys.a, sys.b, sys.c, sys.d, SimpleSet::WholeSpace, 1).unwrap();
    let x = oracle_feasibility_cyclic_problem(&problem, &vec![0.0; 30], 1e-8, 100_000).unwrap();
    assert!(problem.eq_residual(&x).max(problem.ineq_residual(&x)) <= 1e-8);
}
