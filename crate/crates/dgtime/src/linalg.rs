//! Matrix storage and small linear-algebra kernels shared by the solver
//! modules: CSR sparse matrices, a dense/sparse symmetric wrapper, a banded
//! Cholesky factorization, and the Kronecker-product applies that keep slab
//! operators matrix free.

use nalgebra::{DMatrix, DVector};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Dimension above which assembled spatial matrices default to CSR storage.
pub const DEFAULT_SPARSE_THRESHOLD: usize = 200;

/// Memory cap (in stored entries) for banded Cholesky factors.
const MAX_FACTOR_ENTRIES: usize = 40_000_000;

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed and
    /// explicit zeros dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut merged: HashMap<(usize, usize), f64> = HashMap::with_capacity(triplets.len());
        for &(i, j, v) in triplets {
            if i >= nrows || j >= ncols {
                return Err(Error::Validation(format!(
                    "triplet ({i}, {j}) out of bounds for {nrows}x{ncols} matrix"
                )));
            }
            *merged.entry((i, j)).or_insert(0.0) += v;
        }
        let mut entries: Vec<((usize, usize), f64)> =
            merged.into_iter().filter(|(_, v)| *v != 0.0).collect();
        entries.sort_unstable_by_key(|&((i, j), _)| (i, j));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for ((i, j), v) in entries {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            vals.push(v);
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, v) in self.row(i) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Half bandwidth, the largest `|i - j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.iter_entries()
            .map(|(i, j, _)| i.abs_diff(j))
            .max()
            .unwrap_or(0)
    }
}

/// Square real matrix in dense or CSR storage. Spatial system matrices are
/// held behind this so the time integrator never commits to a layout.
#[derive(Debug, Clone)]
pub enum SymMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl SymMatrix {
    /// Wrap a dense matrix, converting to CSR above the given dimension threshold.
    pub fn from_dense_auto(m: DMatrix<f64>, sparse_threshold: usize) -> Self {
        if m.nrows() > sparse_threshold {
            let mut triplets = Vec::new();
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    if m[(i, j)] != 0.0 {
                        triplets.push((i, j, m[(i, j)]));
                    }
                }
            }
            SymMatrix::Sparse(CsrMatrix::from_triplets(m.nrows(), m.ncols(), &triplets).unwrap())
        } else {
            SymMatrix::Dense(m)
        }
    }

    pub fn from_triplets_auto(
        dim: usize,
        triplets: &[(usize, usize, f64)],
        sparse_threshold: usize,
    ) -> Result<Self> {
        let csr = CsrMatrix::from_triplets(dim, dim, triplets)?;
        Ok(if dim > sparse_threshold {
            SymMatrix::Sparse(csr)
        } else {
            SymMatrix::Dense(csr.to_dense())
        })
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix::Dense(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix::Dense(DMatrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            SymMatrix::Dense(m) => m.nrows(),
            SymMatrix::Sparse(m) => m.nrows(),
        }
    }

    pub fn is_square(&self) -> bool {
        match self {
            SymMatrix::Dense(m) => m.is_square(),
            SymMatrix::Sparse(m) => m.nrows() == m.ncols(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            SymMatrix::Dense(m) => m[(i, j)],
            SymMatrix::Sparse(m) => m.get(i, j),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            SymMatrix::Dense(m) => m.amax(),
            SymMatrix::Sparse(m) => m.max_abs(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.max_abs() == 0.0
    }

    pub fn max_asymmetry(&self) -> f64 {
        match self {
            SymMatrix::Dense(m) => {
                let mut worst = 0.0f64;
                for i in 0..m.nrows() {
                    for j in (i + 1)..m.ncols() {
                        worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
                    }
                }
                worst
            }
            SymMatrix::Sparse(m) => {
                let mut worst = 0.0f64;
                for (i, j, v) in m.iter_entries() {
                    if j > i {
                        worst = worst.max((v - m.get(j, i)).abs());
                    } else if j < i && m.get(j, i) == 0.0 {
                        worst = worst.max(v.abs());
                    }
                }
                worst
            }
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        match self {
            SymMatrix::Dense(m) => {
                for i in 0..m.nrows() {
                    let mut acc = 0.0;
                    for j in 0..m.ncols() {
                        acc += m[(i, j)] * x[j];
                    }
                    y[i] = acc;
                }
            }
            SymMatrix::Sparse(m) => m.mul_vec_into(x, y),
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.dim());
        self.mul_vec_into(x.as_slice(), y.as_mut_slice());
        y
    }

    /// Quadratic form `x' A x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        self.mul_vec(x).dot(x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymMatrix::Dense(m) => m.clone(),
            SymMatrix::Sparse(m) => m.to_dense(),
        }
    }

    /// A copy with `shift` added to the diagonal.
    pub fn plus_diagonal(&self, shift: f64) -> Self {
        match self {
            SymMatrix::Dense(m) => {
                let mut out = m.clone();
                for i in 0..out.nrows() {
                    out[(i, i)] += shift;
                }
                SymMatrix::Dense(out)
            }
            SymMatrix::Sparse(m) => {
                let mut triplets: Vec<(usize, usize, f64)> = m.iter_entries().collect();
                for i in 0..m.nrows() {
                    triplets.push((i, i, shift));
                }
                SymMatrix::Sparse(CsrMatrix::from_triplets(m.nrows(), m.ncols(), &triplets).unwrap())
            }
        }
    }

    pub fn bandwidth(&self) -> usize {
        match self {
            SymMatrix::Dense(m) => {
                let mut b = 0usize;
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        if m[(i, j)] != 0.0 {
                            b = b.max(i.abs_diff(j));
                        }
                    }
                }
                b
            }
            SymMatrix::Sparse(m) => m.bandwidth(),
        }
    }

    pub fn iter_nonzero(&self) -> Vec<(usize, usize, f64)> {
        match self {
            SymMatrix::Dense(m) => {
                let mut out = Vec::new();
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        if m[(i, j)] != 0.0 {
                            out.push((i, j, m[(i, j)]));
                        }
                    }
                }
                out
            }
            SymMatrix::Sparse(m) => m.iter_entries().collect(),
        }
    }
}

/// Cholesky factorization `A = L L'` in symmetric band storage. The bandwidth
/// is taken from the sparsity pattern, so a dense matrix degrades gracefully
/// to a full lower-triangular factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    dim: usize,
    bandwidth: usize,
    /// `bands[k * dim + j] = L[j + k, j]` for `k = 0..=bandwidth`.
    bands: Vec<f64>,
}

impl BandedCholesky {
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        let d = a.dim();
        let b = a.bandwidth();
        let entries = (b + 1).saturating_mul(d);
        if entries > MAX_FACTOR_ENTRIES {
            return Err(Error::Validation(format!(
                "Cholesky factor with bandwidth {b} at dimension {d} exceeds the desk-scale memory cap"
            )));
        }
        let mut bands = vec![0.0f64; entries];
        let at = |bands: &[f64], i: usize, j: usize| -> f64 {
            debug_assert!(i >= j && i - j <= b);
            bands[(i - j) * d + j]
        };
        for j in 0..d {
            let lo = j.saturating_sub(b);
            let mut diag = a.get(j, j);
            for k in lo..j {
                let l = at(&bands, j, k);
                diag -= l * l;
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::Validation(format!(
                    "matrix is not positive definite: Cholesky pivot {j} = {diag:.6e}"
                )));
            }
            let ljj = diag.sqrt();
            bands[j] = ljj;
            let hi = (j + b).min(d - 1);
            for i in (j + 1)..=hi {
                let mut v = a.get(i, j);
                let lo_i = i.saturating_sub(b).max(lo);
                for k in lo_i..j {
                    v -= at(&bands, i, k) * at(&bands, j, k);
                }
                bands[(i - j) * d + j] = v / ljj;
            }
        }
        Ok(BandedCholesky {
            dim: d,
            bandwidth: b,
            bands,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve `L y = b` (forward substitution).
    pub fn solve_lower(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let (d, b) = (self.dim, self.bandwidth);
        let mut y = rhs.clone();
        for j in 0..d {
            y[j] /= self.bands[j];
            let hi = (j + b).min(d - 1);
            for i in (j + 1)..=hi {
                y[i] -= self.bands[(i - j) * d + j] * y[j];
            }
        }
        y
    }

    /// Solve `L' x = y` (back substitution).
    pub fn solve_upper(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let (d, b) = (self.dim, self.bandwidth);
        let mut x = rhs.clone();
        for j in (0..d).rev() {
            let hi = (j + b).min(d - 1);
            for i in (j + 1)..=hi {
                x[j] -= self.bands[(i - j) * d + j] * x[i];
            }
            x[j] /= self.bands[j];
        }
        x
    }

    /// Solve `A x = b`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.solve_upper(&self.solve_lower(rhs))
    }
}

/// Apply `S (x) N` to `x` with the time index fastest: position
/// `(i, l) -> i * modes + l`, so the result row block `i` is
/// `sum_j S[i,j] * (N x_j)` with `x_j` the time-mode slice of dof `j`.
pub fn kron_apply(s: &SymMatrix, n: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let modes = n.nrows();
    let d = s.dim();
    debug_assert_eq!(x.len(), d * modes);
    // Stage 1: y1 = (I (x) N) x.
    let y1 = kron_apply_time(n, x, d);
    // Stage 2: mix dofs with S row by row.
    let mut y = DVector::zeros(d * modes);
    match s {
        SymMatrix::Dense(m) => {
            for i in 0..d {
                for j in 0..d {
                    let sij = m[(i, j)];
                    if sij != 0.0 {
                        for l in 0..modes {
                            y[i * modes + l] += sij * y1[j * modes + l];
                        }
                    }
                }
            }
        }
        SymMatrix::Sparse(m) => {
            for i in 0..d {
                for (j, sij) in m.row(i) {
                    for l in 0..modes {
                        y[i * modes + l] += sij * y1[j * modes + l];
                    }
                }
            }
        }
    }
    y
}

/// Apply `I_d (x) N`.
pub fn kron_apply_time(n: &DMatrix<f64>, x: &DVector<f64>, d: usize) -> DVector<f64> {
    let modes = n.nrows();
    debug_assert_eq!(x.len(), d * modes);
    let mut y = DVector::zeros(d * modes);
    for i in 0..d {
        let base = i * modes;
        for l in 0..modes {
            let mut acc = 0.0;
            for m in 0..modes {
                acc += n[(l, m)] * x[base + m];
            }
            y[base + l] = acc;
        }
    }
    y
}

/// Dense `S (x) N` in the same (space, time) ordering as `kron_apply`.
pub fn kron_dense(s: &DMatrix<f64>, n: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, modes) = (s.nrows(), n.nrows());
    let mut out = DMatrix::zeros(d * modes, d * modes);
    for i in 0..d {
        for j in 0..d {
            let sij = s[(i, j)];
            if sij == 0.0 {
                continue;
            }
            for l in 0..modes {
                for m in 0..modes {
                    out[(i * modes + l, j * modes + m)] = sij * n[(l, m)];
                }
            }
        }
    }
    out
}

/// Materialize a matrix-free operator column by column.
pub fn operator_to_dense(apply: &dyn Fn(&DVector<f64>) -> DVector<f64>, size: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(size, size);
    let mut e = DVector::zeros(size);
    for j in 0..size {
        e[j] = 1.0;
        let col = apply(&e);
        out.set_column(j, &col);
        e[j] = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_dense(d: usize, rng: &mut StdRng) -> DMatrix<f64> {
        DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn csr_matvec_matches_dense() {
        let mut rng = StdRng::seed_from_u64(7);
        let d = 17;
        let dense = random_dense(d, &mut rng);
        let triplets: Vec<(usize, usize, f64)> = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j, 0.0)))
            .map(|(i, j, _)| (i, j, dense[(i, j)]))
            .collect();
        let csr = CsrMatrix::from_triplets(d, d, &triplets).unwrap();
        let x = DVector::from_fn(d, |i, _| (i as f64).sin());
        let mut y = vec![0.0; d];
        csr.mul_vec_into(x.as_slice(), &mut y);
        let want = &dense * &x;
        for i in 0..d {
            assert_relative_eq!(y[i], want[i], epsilon = 1e-12);
        }
        assert_relative_eq!(csr.to_dense(), dense, epsilon = 0.0);
    }

    #[test]
    fn csr_duplicate_triplets_are_summed() {
        let csr = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]).unwrap();
        assert_eq!(csr.get(0, 0), 3.0);
        assert_eq!(csr.get(1, 0), -1.0);
        assert_eq!(csr.get(1, 1), 0.0);
        assert_eq!(csr.nnz(), 2);
    }

    #[test]
    fn banded_cholesky_solves_spd_systems() {
        let mut rng = StdRng::seed_from_u64(11);
        for d in [1, 5, 30] {
            let b = random_dense(d, &mut rng);
            let spd = &b * b.transpose() + DMatrix::identity(d, d) * (d as f64);
            let a = SymMatrix::Dense(spd.clone());
            let chol = BandedCholesky::factor(&a).unwrap();
            let x = DVector::from_fn(d, |i, _| (i as f64 + 1.0).cos());
            let rhs = &spd * &x;
            let got = chol.solve(&rhs);
            assert_relative_eq!(got, x, epsilon = 1e-9);
        }
    }

    #[test]
    fn banded_cholesky_tridiagonal_stays_banded() {
        let d = 500;
        let mut triplets = Vec::new();
        for i in 0..d {
            triplets.push((i, i, 2.0));
            if i + 1 < d {
                triplets.push((i, i + 1, -1.0));
                triplets.push((i + 1, i, -1.0));
            }
        }
        let a = SymMatrix::Sparse(CsrMatrix::from_triplets(d, d, &triplets).unwrap());
        assert_eq!(a.bandwidth(), 1);
        let chol = BandedCholesky::factor(&a).unwrap();
        let x = DVector::from_fn(d, |i, _| ((i * i) % 13) as f64 - 6.0);
        let rhs = a.mul_vec(&x);
        assert_relative_eq!(chol.solve(&rhs), x, epsilon = 1e-8);
    }

    #[test]
    fn banded_cholesky_rejects_indefinite_naming_pivot() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = BandedCholesky::factor(&SymMatrix::Dense(m)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pivot 1"), "unexpected message: {msg}");
    }

    #[test]
    fn kron_apply_matches_dense_kronecker() {
        let mut rng = StdRng::seed_from_u64(3);
        for (d, modes) in [(3, 2), (5, 4), (1, 3)] {
            let s_dense = random_dense(d, &mut rng);
            let n = random_dense(modes, &mut rng);
            let x = DVector::from_fn(d * modes, |i, _| (i as f64 * 0.7).sin());
            let want = kron_dense(&s_dense, &n) * &x;

            let s = SymMatrix::Dense(s_dense.clone());
            assert_relative_eq!(kron_apply(&s, &n, &x), want, epsilon = 1e-12);

            let triplets: Vec<(usize, usize, f64)> = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, s_dense[(i, j)]))
                .collect();
            let s_sparse = SymMatrix::Sparse(CsrMatrix::from_triplets(d, d, &triplets).unwrap());
            assert_relative_eq!(kron_apply(&s_sparse, &n, &x), want, epsilon = 1e-12);

            let eye = SymMatrix::identity(d);
            assert_relative_eq!(
                kron_apply(&eye, &n, &x),
                kron_apply_time(&n, &x, d),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn max_asymmetry_detects_sparse_one_sided_entries() {
        let m = CsrMatrix::from_triplets(3, 3, &[(0, 1, 1e-3), (1, 1, 2.0)]).unwrap();
        let s = SymMatrix::Sparse(m);
        assert_relative_eq!(s.max_asymmetry(), 1e-3, epsilon = 1e-15);
    }

    #[test]
    fn operator_to_dense_reconstructs() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let mc = m.clone();
        let apply = move |x: &DVector<f64>| &mc * x;
        let rebuilt = operator_to_dense(&apply, 2);
        assert_relative_eq!(rebuilt, m, epsilon = 0.0);
    }
}
