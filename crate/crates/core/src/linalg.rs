//! Vector helpers and row-oriented matrix storage (dense or CSR).

use nalgebra::DMatrix;

use crate::error::{Result, SspError};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One row of a [`Matrix`], either a dense slice or sparse (index, value) pairs.
#[derive(Clone, Copy, Debug)]
pub enum Row<'a> {
    Dense(&'a [f64]),
    Sparse { indices: &'a [usize], values: &'a [f64] },
}

impl Row<'_> {
    pub fn dot(&self, x: &[f64]) -> f64 {
        match *self {
            Row::Dense(r) => dot(r, x),
            Row::Sparse { indices, values } => indices.iter().zip(values).map(|(&j, v)| v * x[j]).sum(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        match *self {
            Row::Dense(r) => norm_sq(r),
            Row::Sparse { values, .. } => norm_sq(values),
        }
    }

    /// `y += a * row`
    pub fn axpy_into(&self, a: f64, y: &mut [f64]) {
        match *self {
            Row::Dense(r) => axpy(a, r, y),
            Row::Sparse { indices, values } => {
                for (&j, v) in indices.iter().zip(values) {
                    y[j] += a * v;
                }
            }
        }
    }

    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            Row::Dense(r) => r
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .for_each(|(j, v)| f(j, *v)),
            Row::Sparse { indices, values } => indices.iter().zip(values).for_each(|(&j, &v)| f(j, v)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Csr {
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Row-major matrix. Rows are the unit of access for every solver here.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    storage: Storage,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_dense(rows, cols, vec![0.0; rows * cols]).expect("sizes agree")
    }

    /// Dense matrix from row-major data.
    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SspError::dimension(format!(
                "dense data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            storage: Storage::Dense(data),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SspError::dimension("ragged rows"));
        }
        Self::from_dense(rows.len(), cols, rows.concat())
    }

    /// CSR matrix from (row, col, value) triplets. Duplicates are rejected.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j, v) in &sorted {
            if i >= rows || j >= cols {
                return Err(SspError::dimension(format!("entry ({i},{j}) outside {rows}x{cols}")));
            }
            if prev == Some((i, j)) {
                return Err(SspError::config(format!("duplicate entry ({i},{j})")));
            }
            prev = Some((i, j));
            indptr[i + 1] += 1;
            indices.push(j);
            values.push(v);
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            storage: Storage::Csr {
                indptr,
                indices,
                values,
            },
        })
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Csr { .. })
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        match &self.storage {
            Storage::Dense(d) => Row::Dense(&d[i * self.cols..(i + 1) * self.cols]),
            Storage::Csr {
                indptr,
                indices,
                values,
            } => {
                let (s, e) = (indptr[i], indptr[i + 1]);
                Row::Sparse {
                    indices: &indices[s..e],
                    values: &values[s..e],
                }
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.row(i) {
            Row::Dense(r) => r[j],
            Row::Sparse { indices, values } => indices.binary_search(&j).map_or(0.0, |k| values[k]),
        }
    }

    /// Nonzero entries as (row, col, value), row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.rows {
            self.row(i).for_each_nonzero(|j, v| out.push((i, j, v)));
        }
        out
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).dot(x)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let t: Vec<(usize, usize, f64)> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        let m = Matrix::from_triplets(self.cols, self.rows, &t).expect("transpose of valid matrix");
        if self.is_sparse() {
            m
        } else {
            m.to_dense()
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for (i, j, v) in self.triplets() {
            data[i * self.cols + j] = v;
        }
        Matrix::from_dense(self.rows, self.cols, data).expect("sizes agree")
    }

    /// Rows `range` as a new matrix with the same storage kind.
    pub fn row_block(&self, start: usize, end: usize) -> Matrix {
        match &self.storage {
            Storage::Dense(d) => {
                Matrix::from_dense(end - start, self.cols, d[start * self.cols..end * self.cols].to_vec())
                    .expect("sizes agree")
            }
            Storage::Csr { .. } => {
                let mut t = Vec::new();
                for i in start..end {
                    self.row(i).for_each_nonzero(|j, v| t.push((i - start, j, v)));
                }
                Matrix::from_triplets(end - start, self.cols, &t).expect("valid block")
            }
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        (0..self.rows).map(|i| self.row(i).norm_sq()).sum()
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Stack `blocks` vertically. All must share the column count.
    pub fn vstack(blocks: &[&Matrix]) -> Result<Matrix> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        if blocks.iter().any(|b| b.cols != cols) {
            return Err(SspError::dimension("vstack column mismatch"));
        }
        let mut t = Vec::new();
        let mut offset = 0;
        for b in blocks {
            for (i, j, v) in b.triplets() {
                t.push((i + offset, j, v));
            }
            offset += b.rows;
        }
        let m = Matrix::from_triplets(offset, cols, &t)?;
        Ok(if blocks.iter().all(|b| !b.is_sparse()) {
            m.to_dense()
        } else {
            m
        })
    }
}

/// Blocks at most this many rows get a dense SVD; larger ones use power iteration.
pub const DENSE_SVD_MAX_ROWS: usize = 64;
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 1000;

/// Largest singular value of `m`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 {
        return m.row(0).norm_sq().sqrt();
    }
    if m.nrows() <= DENSE_SVD_MAX_ROWS {
        return m.to_nalgebra().singular_values().iter().cloned().fold(0.0, f64::max);
    }
    power_iteration_norm(m)
}

/// Power iteration on `MᵀM`, deterministic start vector.
fn power_iteration_norm(m: &Matrix) -> f64 {
    let n = m.ncols();
    let mut x: Vec<f64> = (0..n).map(|j| 1.0 + (j as f64 * 0.618_033_988_7).fract()).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma_sq = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let y = m.mul_vec(&x);
        let mut z = vec![0.0; n];
        for (i, yi) in y.iter().enumerate() {
            m.row(i).axpy_into(*yi, &mut z);
        }
        let nz = norm(&z);
        if nz == 0.0 {
            return 0.0;
        }
        let next = nz;
        z.iter_mut().for_each(|v| *v /= nz);
        x = z;
        if (next - sigma_sq).abs() <= POWER_TOL * next {
            sigma_sq = next;
            break;
        }
        sigma_sq = next;
    }
    sigma_sq.sqrt()
}

/// Largest and smallest nonzero singular values (dense SVD).
pub fn singular_extremes(m: &Matrix) -> Option<(f64, f64)> {
    if m.nrows() == 1 {
        let s = m.row(0).norm_sq().sqrt();
        return (s > 0.0).then_some((s, s));
    }
    let sv = m.to_nalgebra().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return None;
    }
    let cutoff = smax * f64::EPSILON * (m.nrows().max(m.ncols()) as f64);
    let smin = sv.iter().cloned().filter(|s| *s > cutoff).fold(f64::INFINITY, f64::min);
    Some((smax, smin))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_and_sparse_rows_agree() {
        let d = Matrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 0.0]]).unwrap();
        let s = Matrix::from_triplets(2, 3, &d.triplets()).unwrap();
        let x = [1.0, 2.0, 3.0];
        assert_eq!(d.mul_vec(&x), s.mul_vec(&x));
        assert_eq!(d.frobenius_sq(), s.frobenius_sq());
        assert_eq!(s.get(0, 2), 2.0);
        assert_eq!(s.get(1, 0), 0.0);
    }

    #[test]
    fn duplicate_triplet_rejected() {
        assert!(Matrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]).is_err());
    }

    #[test]
    fn power_iteration_matches_svd() {
        let mut s = crate::rng::RandomStream::new(11);
        let data: Vec<f64> = (0..100 * 7).map(|_| s.standard_normal()).collect();
        let m = Matrix::from_dense(100, 7, data).unwrap();
        let svd = m.to_nalgebra().singular_values().max();
        let pow = power_iteration_norm(&m);
        assert!((svd - pow).abs() <= 1e-8 * svd, "{svd} vs {pow}");
    }

    #[test]
    fn transpose_roundtrip() {
        let m = Matrix::from_triplets(2, 3, &[(0, 1, 1.5), (1, 2, -2.0)]).unwrap();
        assert_eq!(m.transpose().transpose(), m);
        assert_eq!(m.transpose().get(2, 1), -2.0);
    }
}
