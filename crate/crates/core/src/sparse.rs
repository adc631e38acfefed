//! Compressed sparse row matrices and an envelope (profile) Cholesky
//! factorization for the SPD systems of the time stepper.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::{Error, Result};

/// Relative residual accepted from [`Cholesky::solve`].
pub const SOLVE_RTOL: f64 = 1e-13;

/// Square CSR matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Sums duplicate entries. Duplicates are added in input order, so the
    /// result is bit-reproducible for a fixed triplet sequence.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        // Stable sort keeps the element order within each (row, col) bucket.
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col_idx, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    /// Entries in row-major order as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// `y = A x`.
    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    /// `alpha A + diag(d)`, keeping the sparsity pattern of `A` (the
    /// diagonal must already be stored).
    pub fn scaled_plus_diagonal(&self, alpha: f64, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.n);
        let mut out = self.clone();
        for (i, &di) in d.iter().enumerate() {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.values[k] *= alpha;
                if out.col_idx[k] == i {
                    out.values[k] += di;
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.triplets().all(|(i, j, v)| (v - self.get(j, i)).abs() <= tol)
    }

    /// Dense column-major copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for (i, j, v) in self.triplets() {
            d[j * self.n + i] = v;
        }
        d
    }

    fn inf_norm(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Envelope Cholesky factor `A = L Lᵀ` of a symmetric positive definite
/// matrix. Row `i` of `L` is stored densely from its first structural
/// nonzero up to the diagonal.
#[derive(Debug, Clone)]
pub struct Cholesky {
    matrix: CsrMatrix,
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
    norm: f64,
}

impl Cholesky {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let first: Vec<usize> =
            (0..n).map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j <= i).min().unwrap_or(i)).collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = data[start[i] + j - fi];
                for k in k0..j {
                    s -= data[start[i] + k - fi] * data[start[j] + k - fj];
                }
                if j < i {
                    data[start[i] + j - fi] = s / data[start[j] + j - fj];
                } else {
                    if !(s > 0.0) {
                        return Err(Error::NotPositiveDefinite { pivot: i, value: s });
                    }
                    data[start[i] + i - fi] = math::sqrt(s);
                }
            }
        }
        Ok(Self { matrix: a.clone(), first, start, data, norm: a.inf_norm() })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    fn solve_raw(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let mut s = b[i];
            for k in fi..i {
                s -= row[k - fi] * b[k];
            }
            b[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            b[i] /= row[i - fi];
            let xi = b[i];
            for k in fi..i {
                b[k] -= row[k - fi] * xi;
            }
        }
    }

    /// Solves `A x = b` in place with one step of iterative refinement and
    /// checks `‖b − A x‖∞ ≤ SOLVE_RTOL (‖A‖∞ ‖x‖∞ + ‖b‖∞)`.
    pub fn solve(&self, b: &mut [f64]) -> Result<()> {
        assert_eq!(b.len(), self.dim());
        let rhs = b.to_vec();
        self.solve_raw(b);
        let mut r = self.matrix.mul_vec(b);
        for (ri, bi) in r.iter_mut().zip(&rhs) {
            *ri = bi - *ri;
        }
        self.solve_raw(&mut r);
        for (xi, di) in b.iter_mut().zip(&r) {
            *xi += di;
        }
        let ax = self.matrix.mul_vec(b);
        let res = ax.iter().zip(&rhs).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        let xn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bn = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = self.norm * xn + bn;
        if !(res <= SOLVE_RTOL * scale) && scale > 0.0 {
            return Err(Error::LinearSolveResidual(res / scale));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize, shift: f64) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + shift));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_are_summed() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (0, 1, -1.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.mul_vec(&[1.0, 2.0]), vec![2.0, 2.0]);
    }

    #[test]
    fn cholesky_solves_tridiagonal() {
        let a = laplace_1d(50, 0.1);
        let f = Cholesky::new(&a).unwrap();
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = a.mul_vec(&x);
        f.solve(&mut b).unwrap();
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = laplace_1d(5, -3.0);
        assert!(matches!(Cholesky::new(&a), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn scaled_plus_diagonal() {
        let a = laplace_1d(3, 0.0).scaled_plus_diagonal(2.0, &[1.0, 1.0, 1.0]);
        assert_eq!(a.get(0, 0), 5.0);
        assert_eq!(a.get(0, 1), -2.0);
    }
}
