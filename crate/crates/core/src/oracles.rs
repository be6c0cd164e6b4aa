//! Slow, independent baselines for cross-checking the solvers. Nothing here
//! calls into the solver, projection or linear-algebra helpers; data types
//! are only read.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SspError};
use crate::linalg::Matrix;
use crate::ls::LinearFeasibilityProblem;
use crate::prox::SimpleSet;

/// `(row, rhs)` pairs.
pub type LinearRows = Vec<(Vec<f64>, f64)>;

fn ip(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn dense_rows(m: &Matrix, rhs: &[f64]) -> LinearRows {
    (0..m.nrows())
        .map(|i| ((0..m.ncols()).map(|j| m.get(i, j)).collect(), rhs[i]))
        .collect()
}

fn project_simple(set: &SimpleSet, x: &mut [f64]) {
    match set {
        SimpleSet::WholeSpace => {}
        SimpleSet::NonnegativeOrthant => {
            for v in x.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        SimpleSet::Box { lower, upper } => {
            for i in 0..x.len() {
                if x[i] < lower[i] {
                    x[i] = lower[i];
                } else if x[i] > upper[i] {
                    x[i] = upper[i];
                }
            }
        }
        SimpleSet::Halfspace { c, d } => {
            let excess = ip(c, x) - d;
            if excess > 0.0 {
                let cc = ip(c, c);
                for i in 0..x.len() {
                    x[i] -= excess / cc * c[i];
                }
            }
        }
        SimpleSet::Hyperplane { c, d } => {
            let excess = ip(c, x) - d;
            let cc = ip(c, c);
            for i in 0..x.len() {
                x[i] -= excess / cc * c[i];
            }
        }
        SimpleSet::NonnegativeCoords(idx) => {
            for &i in idx {
                if x[i] < 0.0 {
                    x[i] = 0.0;
                }
            }
        }
    }
}

fn system_residual(eq: &LinearRows, ineq: &LinearRows, x: &[f64]) -> f64 {
    let e: f64 = eq.iter().map(|(r, b)| (ip(r, x) - b).powi(2)).sum();
    let i: f64 = ineq.iter().map(|(r, d)| (ip(r, x) - d).max(0.0).powi(2)).sum();
    e.sqrt().max(i.sqrt())
}

/// Cyclic exact projections onto each equality hyperplane, each violated
/// halfspace and then `Y`, until `max(‖Ax−b‖, ‖(Cx−d)₊‖) ≤ tol`.
pub fn oracle_feasibility_cyclic(
    eq: &LinearRows,
    ineq: &LinearRows,
    y: &SimpleSet,
    x0: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    let mut x = x0.to_vec();
    project_simple(y, &mut x);
    for _ in 0..max_sweeps {
        if system_residual(eq, ineq, &x) <= tol {
            return Ok(x);
        }
        for (r, b) in eq {
            let rr = ip(r, r);
            if rr > 0.0 {
                let t = (ip(r, &x) - b) / rr;
                for i in 0..x.len() {
                    x[i] -= t * r[i];
                }
            }
        }
        for (r, d) in ineq {
            let rr = ip(r, r);
            let excess = ip(r, &x) - d;
            if rr > 0.0 && excess > 0.0 {
                for i in 0..x.len() {
                    x[i] -= excess / rr * r[i];
                }
            }
        }
        project_simple(y, &mut x);
    }
    if system_residual(eq, ineq, &x) <= tol {
        Ok(x)
    } else {
        Err(SspError::config(format!(
            "cyclic projections did not reach {tol} in {max_sweeps} sweeps"
        )))
    }
}

pub fn oracle_feasibility_cyclic_problem(
    problem: &LinearFeasibilityProblem,
    x0: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> Result<Vec<f64>> {
    oracle_feasibility_cyclic(
        &dense_rows(problem.a(), problem.b()),
        &dense_rows(problem.c(), problem.d()),
        problem.simple_set(),
        x0,
        tol,
        max_sweeps,
    )
}

/// One randomized Kaczmarz projection per listed row, in order.
pub fn oracle_kaczmarz(rows: &LinearRows, x0: &[f64], sequence: &[usize]) -> Vec<Vec<f64>> {
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(sequence.len());
    for &i in sequence {
        let (r, b) = &rows[i];
        let t = (ip(r, &x) - b) / ip(r, r);
        for j in 0..x.len() {
            x[j] -= t * r[j];
        }
        out.push(x.clone());
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOracle {
    Optimal {
        value: f64,
        point: Vec<f64>,
        /// Number of basic feasible points enumerated.
        vertices: usize,
    },
    Infeasible,
    Unbounded,
}

/// Solves `M x = r` by Gaussian elimination with partial pivoting.
fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            let (top, bottom) = m.split_at_mut(row);
            for (t, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *t -= f * p;
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

fn next_subset(idx: &mut [usize], total: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < total - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `min cᵀz s.t. Cz ≤ d, z ≥ 0` by enumerating every basic point.
/// A large cap `Σz ≤ M` detects unboundedness.
pub fn oracle_small_lp(cost: &[f64], c: &Matrix, d: &[f64]) -> Result<LpOracle> {
    let n = cost.len();
    if n == 0 || n > 6 {
        return Err(SspError::config("vertex enumeration supports 1 to 6 variables"));
    }
    if c.ncols() != n || c.nrows() != d.len() {
        return Err(SspError::dimension("LP data sizes disagree"));
    }
    const CAP: f64 = 1e7;
    let mut rows = dense_rows(c, d);
    for j in 0..n {
        let mut r = vec![0.0; n];
        r[j] = -1.0;
        rows.push((r, 0.0));
    }
    let cap_row = rows.len();
    rows.push((vec![1.0; n], CAP));

    let feasible = |z: &[f64]| rows.iter().all(|(r, b)| ip(r, z) - b <= 1e-9 * (1.0 + b.abs()));
    let mut best: Option<(f64, Vec<f64>, bool)> = None;
    let mut best_uncapped: Option<f64> = None;
    let mut vertices = 0;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let m: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].0.clone()).collect();
        let r: Vec<f64> = idx.iter().map(|&i| rows[i].1).collect();
        if let Some(z) = solve_square(m, r) {
            if feasible(&z) {
                vertices += 1;
                let v = ip(cost, &z);
                let on_cap = (ip(&rows[cap_row].0, &z) - CAP).abs() < 1e-6 * CAP;
                if !on_cap {
                    best_uncapped = Some(best_uncapped.map_or(v, |b: f64| b.min(v)));
                }
                if best.as_ref().is_none_or(|(bv, _, _)| v < *bv) {
                    best = Some((v, z, on_cap));
                }
            }
        }
        if !next_subset(&mut idx, rows.len()) {
            break;
        }
    }
    match best {
        None => Ok(LpOracle::Infeasible),
        Some((v, _, true)) if best_uncapped.is_none_or(|u| v < u - 1e-9 * (1.0 + u.abs())) => Ok(LpOracle::Unbounded),
        Some((v, z, _)) => Ok(LpOracle::Optimal {
            value: v,
            point: z,
            vertices,
        }),
    }
}

/// Minimum of `y(wᵀz̄ + d)` over `samples` points on the boundary of
/// `{z̄ : (z̄ − z)ᵀQ(z̄ − z) ≤ 1}`, `Q = diag(q_diag)`. Directions are
/// Gaussian, normalized in the `Q` metric.
pub fn oracle_ellipsoid_min(w: &[f64], d: f64, z: &[f64], y: f64, q_diag: &[f64], samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = z.len();
    let mut g = vec![0.0; n];
    let mut best = f64::INFINITY;
    for _ in 0..samples.max(1) {
        for gi in g.iter_mut() {
            *gi = StandardNormal.sample(&mut rng);
        }
        let mut qn = 0.0;
        for i in 0..n {
            qn += q_diag[i] * g[i] * g[i];
        }
        let qn = qn.sqrt();
        if qn == 0.0 {
            continue;
        }
        let mut score = d;
        for i in 0..n {
            score += w[i] * (z[i] + g[i] / qn);
        }
        best = best.min(y * score);
    }
    best
}

/// Max over coordinates of `|central difference − grad_i|`.
pub fn finite_diff_subgradient_check(f: &dyn Fn(&[f64]) -> f64, grad: &[f64], x: &[f64], step: f64) -> f64 {
    let mut worst: f64 = 0.0;
    let mut p = x.to_vec();
    for i in 0..x.len() {
        p[i] = x[i] + step;
        let up = f(&p);
        p[i] = x[i] - step;
        let down = f(&p);
        p[i] = x[i];
        worst = worst.max(((up - down) / (2.0 * step) - grad[i]).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_two_halfspaces() {
        // x ≥ 1, x ≤ 3
        let ineq = vec![(vec![-1.0], -1.0), (vec![1.0], 3.0)];
        let x = oracle_feasibility_cyclic(&vec![], &ineq, &SimpleSet::WholeSpace, &[0.0], 1e-12, 10).unwrap();
        assert_eq!(x, vec![1.0]);
    }

    #[test]
    fn cyclic_empty_is_projection() {
        let x =
            oracle_feasibility_cyclic(&vec![], &vec![], &SimpleSet::NonnegativeOrthant, &[-1.0, 2.0], 1e-9, 1).unwrap();
        assert_eq!(x, vec![0.0, 2.0]);
    }

    #[test]
    fn cyclic_planted_system() {
        let sys = crate::builders::planted_gaussian_system(10, 10, 20, 4);
        let eq = dense_rows(&sys.a, &sys.b);
        let ineq = dense_rows(&sys.c, &sys.d);
        let x = oracle_feasibility_cyclic(&eq, &ineq, &SimpleSet::WholeSpace, &[0.0; 20], 1e-8, 100_000).unwrap();
        assert!(system_residual(&eq, &ineq, &x) <= 1e-8);
    }

    #[test]
    fn cyclic_cap_is_an_error() {
        let ineq = vec![(vec![1.0], 0.0), (vec![-1.0], -1.0)];
        assert!(oracle_feasibility_cyclic(&vec![], &ineq, &SimpleSet::WholeSpace, &[0.5], 1e-9, 50).is_err());
    }

    #[test]
    fn small_lp_examples() {
        let c = Matrix::from_rows(&[vec![-1.0]]).unwrap();
        match oracle_small_lp(&[1.0], &c, &[-1.0]).unwrap() {
            LpOracle::Optimal { value, point, .. } => {
                assert!((value - 1.0).abs() < 1e-12);
                assert!((point[0] - 1.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let c = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        match oracle_small_lp(&[1.0, 1.0], &c, &[1.0, 1.0]).unwrap() {
            LpOracle::Optimal { value, point, vertices } => {
                assert_eq!(value, 0.0);
                assert_eq!(point, vec![0.0, 0.0]);
                assert_eq!(vertices, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn small_lp_statuses() {
        let c = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        assert_eq!(oracle_small_lp(&[1.0], &c, &[1.0, -2.0]).unwrap(), LpOracle::Infeasible);
        let c = Matrix::from_rows(&[vec![-1.0, 1.0]]).unwrap();
        assert_eq!(oracle_small_lp(&[-1.0, 0.0], &c, &[1.0]).unwrap(), LpOracle::Unbounded);
        // unbounded region, bounded objective
        assert!(matches!(
            oracle_small_lp(&[1.0, 1.0], &c, &[1.0]).unwrap(),
            LpOracle::Optimal { .. }
        ));
    }

    #[test]
    fn small_lp_matches_grid() {
        // 3-D LP on a box-bounded region, checked on a 100³ grid
        let c = Matrix::from_rows(&[
            vec![1.0, 1.0, 1.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![-1.0, -2.0, -1.0],
        ])
        .unwrap();
        let d = [2.5, 1.0, 1.0, 1.0, -1.2];
        let cost = [0.7, 0.3, 0.9];
        let LpOracle::Optimal { value, .. } = oracle_small_lp(&cost, &c, &d).unwrap() else {
            panic!("expected an optimum");
        };
        let rows = dense_rows(&c, &d);
        let h = 1.0 / 99.0;
        let mut grid_min = f64::INFINITY;
        for i in 0..100 {
            for j in 0..100 {
                for k in 0..100 {
                    let z = [i as f64 * h, j as f64 * h, k as f64 * h];
                    let ok = rows.iter().all(|(r, b)| ip(r, &z) <= b + 1e-12);
                    if ok {
                        grid_min = grid_min.min(ip(&cost, &z));
                    }
                }
            }
        }
        assert!(value <= grid_min + 1e-12);
        // a grid point lies within h·√3 of the optimum
        assert!(grid_min - value <= 3.0 * h * 2.0);
    }

    #[test]
    fn ellipsoid_min_unit_circle() {
        let v = oracle_ellipsoid_min(&[1.0, 0.0], 0.0, &[0.0, 0.0], 1.0, &[1.0, 1.0], 100_000, 1);
        assert!((v + 1.0).abs() < 1e-3);
        let v = oracle_ellipsoid_min(&[0.0, 0.0], 0.4, &[3.0, 1.0], -1.0, &[2.0, 5.0], 10_000, 2);
        assert_eq!(v, -0.4);
    }

    #[test]
    fn finite_differences() {
        let x = [0.3, -1.2, 2.0];
        let f = |p: &[f64]| 0.5 * p.iter().map(|v| v * v).sum::<f64>();
        assert!(finite_diff_subgradient_check(&f, &x, &x, 1e-5) <= 1e-6);
        let l1 = |p: &[f64]| p.iter().map(|v| v.abs()).sum::<f64>();
        let g: Vec<f64> = x.iter().map(|v| v.signum()).collect();
        assert!(finite_diff_subgradient_check(&l1, &g, &x, 1e-5) <= 1e-6);
    }
}
