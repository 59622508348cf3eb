//! Compressed sparse row matrices and the sparse Cholesky primitive.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Unsorted, possibly duplicated entries. Duplicates are summed on
/// compression.
#[derive(Clone, Debug, Default)]
pub struct Triplets {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Triplets {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn extend_csr(&mut self, m: &Csr, scale: f64) {
        for (i, j, v) in m.iter() {
            self.push(i, j, scale * v);
        }
    }

    pub fn into_csr(self) -> Csr {
        Csr::from_triplets(self.nrows, self.ncols, self.entries)
    }

    /// Compresses the lower triangle and mirrors it, so the result is
    /// bitwise symmetric. Entries above the diagonal are dropped; the
    /// caller guarantees they mirror the lower ones mathematically.
    pub fn into_symmetric_csr(self) -> Csr {
        assert_eq!(self.nrows, self.ncols);
        let n = self.nrows;
        let lower: Vec<_> = self.entries.into_iter().filter(|&(i, j, _)| i >= j).collect();
        let lower = Csr::from_triplets(n, n, lower);
        let mut e: Vec<_> = lower.iter().collect();
        e.extend(lower.iter().filter(|&(i, j, _)| i > j).map(|(i, j, v)| (j, i, v)));
        Csr::from_triplets(n, n, e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl Csr {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Csr {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Csr::from_triplets(
            d.len(),
            d.len(),
            d.iter().enumerate().map(|(i, v)| (i, i, *v)).collect(),
        )
    }

    pub fn from_triplets(nrows: usize, ncols: usize, mut e: Vec<(usize, usize, f64)>) -> Self {
        e.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(e.len());
        let mut values: Vec<f64> = Vec::with_capacity(e.len());
        let mut last = None;
        for (i, j, v) in e {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                values.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        Csr {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut e = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    e.push((i, j, m[(i, j)]));
                }
            }
        }
        Csr::from_triplets(m.nrows(), m.ncols(), e)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()]
            .iter()
            .cloned()
            .zip(self.values[r].iter().cloned())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// y ← y + α·A x
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += alpha * s;
        }
    }

    /// y ← y + α·Aᵀ x
    pub fn matvec_t_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += alpha * v * xi;
                }
            }
        }
    }

    pub fn transpose(&self) -> Csr {
        Csr::from_triplets(
            self.ncols,
            self.nrows,
            self.iter().map(|(i, j, v)| (j, i, v)).collect(),
        )
    }

    pub fn scale(&self, s: f64) -> Csr {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Csr) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut e: Vec<_> = self.iter().collect();
        e.extend(other.iter());
        Csr::from_triplets(self.nrows, self.ncols, e)
    }

    pub fn sub(&self, other: &Csr) -> Csr {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut e = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut seen = vec![false; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !seen[j] {
                        seen[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                e.push((i, j, acc[j]));
                acc[j] = 0.0;
                seen[j] = false;
            }
            touched.clear();
        }
        Csr::from_triplets(self.nrows, other.ncols, e)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |A_ij − A_ji|.
    pub fn asymmetry(&self) -> f64 {
        let t = self.transpose();
        self.sub(&t).max_abs()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn to_faer(&self) -> SparseColMat<usize, f64> {
        let t: Vec<_> = self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .expect("valid triplets")
    }

    /// Pairs (row, col) of stored entries.
    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.iter().map(|(i, j, _)| (i, j)).collect()
    }
}

/// Sparse LLᵀ with a fill-reducing ordering.
pub struct SpdFactor {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
    pub nnz_matrix: usize,
    pub nnz_factor: usize,
}

impl std::fmt::Debug for SpdFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdFactor")
            .field("n", &self.n)
            .field("nnz_matrix", &self.nnz_matrix)
            .field("nnz_factor", &self.nnz_factor)
            .finish()
    }
}

impl SpdFactor {
    pub fn new(a: &Csr) -> Result<Self> {
        Self::new_in(a, None)
    }

    /// `block` tags the error with the block whose matrix failed.
    pub fn new_in(a: &Csr, block: Option<usize>) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Factorization {
                block,
                msg: "matrix is not square".into(),
            });
        }
        let lower = Csr::from_triplets(
            a.nrows,
            a.ncols,
            a.iter().filter(|&(i, j, _)| i >= j).collect(),
        );
        let m = lower.to_faer();
        let err = |e: String| Error::Factorization { block, msg: e };
        let symbolic = faer::sparse::linalg::solvers::SymbolicLlt::try_new(m.symbolic(), Side::Lower)
            .map_err(|e| err(format!("{e:?}")))?;
        let nnz_factor = faer::sparse::linalg::cholesky::factorize_symbolic_cholesky(
            m.symbolic(),
            Side::Lower,
            Default::default(),
            Default::default(),
        )
        .map(|s| s.len_val())
        .unwrap_or(0);
        let llt = faer::sparse::linalg::solvers::Llt::try_new_with_symbolic(symbolic, m.as_ref(), Side::Lower)
            .map_err(|e| err(format!("not positive definite ({e:?})")))?;
        Ok(SpdFactor {
            llt,
            n: a.nrows,
            nnz_matrix: a.nnz(),
            nnz_factor,
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        (0..self.n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves for every column of `b` (n × k, column-major slices).
    pub fn solve_many(&self, b: &mut Mat<f64>) {
        self.llt.solve_in_place(b.as_mut());
    }
}

/// Dense SPD solve used for small trace systems.
pub fn dense_cholesky_solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let chol = nalgebra::Cholesky::new(a).ok_or_else(|| Error::Factorization {
        block: None,
        msg: "dense matrix not positive definite".into(),
    })?;
    let x = chol.solve(&nalgebra::DVector::from_column_slice(b));
    Ok(x.iter().cloned().collect())
}
