//! Compressed sparse row operators and a sparse Cholesky wrapper.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{MatMut, Side};

use crate::error::{FemError, Result};
use crate::spaces::DofMap;

/// Sparse matrix in CSR layout. Built from triplets whose duplicates are
/// summed in input order, so assembly is reproducible bit for bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseOperator {
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
        symmetric: bool,
    ) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        // stable: equal positions keep their insertion order
        order.sort_by_key(|&k| (triplets[k].0, triplets[k].1));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let (i, j, v) = triplets[k];
            assert!(i < nrows && j < ncols, "triplet ({i}, {j}) out of bounds");
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseOperator {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            symmetric,
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &t, true)
    }

    pub fn diagonal_matrix(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), d.len(), &t, true)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols, "matvec dimension mismatch");
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn transpose_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows, "transpose matvec dimension mismatch");
        let mut y = vec![0.0; self.ncols];
        for (i, &xi) in x.iter().enumerate() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.values[k] * xi;
            }
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let t: Vec<_> = self
            .triplets()
            .into_iter()
            .map(|(i, j, v)| (j, i, v))
            .collect();
        Self::from_triplets(self.ncols, self.nrows, &t, self.symmetric)
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.matvec(y))
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// `self + c · other`.
    pub fn add_scaled(&self, other: &SparseOperator, c: f64) -> Self {
        assert_eq!(
            (self.nrows, self.ncols),
            (other.nrows, other.ncols),
            "shape mismatch"
        );
        let mut t = self.triplets();
        t.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, c * v)));
        Self::from_triplets(
            self.nrows,
            self.ncols,
            &t,
            self.symmetric && other.symmetric,
        )
    }

    /// Submatrix on the free rows and columns of the given dof maps.
    pub fn restrict(&self, rows: &DofMap, cols: &DofMap) -> Self {
        let mut t = Vec::with_capacity(self.nnz());
        for (i, j, v) in self.triplets() {
            if let (Some(fi), Some(fj)) = (rows.free_index(i), cols.free_index(j)) {
                t.push((fi, fj, v));
            }
        }
        Self::from_triplets(rows.num_free(), cols.num_free(), &t, self.symmetric)
    }

    /// Rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut t = Vec::new();
        for (new, &i) in rows.iter().enumerate() {
            t.extend(self.row(i).map(|(j, v)| (new, j, v)));
        }
        Self::from_triplets(rows.len(), self.ncols, &t, false)
    }

    /// `selfᵀ diag(w) self`.
    pub fn weighted_gram(&self, w: &[f64]) -> Self {
        assert_eq!(w.len(), self.nrows);
        let mut t = Vec::new();
        for i in 0..self.nrows {
            let row: Vec<_> = self.row(i).collect();
            for &(a, va) in &row {
                for &(b, vb) in &row {
                    t.push((a, b, w[i] * va * vb));
                }
            }
        }
        Self::from_triplets(self.ncols, self.ncols, &t, true)
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.triplets()
            .iter()
            .map(|&(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const SINGULARITY_TOL: f64 = 1e-6;

/// Sparse LLᵀ factorization of a symmetric positive definite operator.
/// The symbolic analysis is reused when the sparsity pattern is unchanged.
pub struct Cholesky {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    symbolic: SymbolicLlt<usize>,
    llt: Llt<usize, f64>,
}

impl Cholesky {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(FemError::Configuration(
                "Cholesky needs a square matrix".into(),
            ));
        }
        // CSR of a symmetric matrix is also its CSC layout
        let sym =
            SymbolicSparseColMatRef::new_checked(a.nrows, a.ncols, &a.row_ptr, None, &a.col_idx);
        let symbolic = SymbolicLlt::try_new(sym, Side::Lower).map_err(|e| {
            FemError::Configuration(format!("symbolic factorization failed: {e:?}"))
        })?;
        let llt = Self::numeric(symbolic.clone(), a)?;
        Ok(Cholesky {
            n: a.nrows,
            row_ptr: a.row_ptr.clone(),
            col_idx: a.col_idx.clone(),
            symbolic,
            llt,
        })
    }

    fn numeric(symbolic: SymbolicLlt<usize>, a: &SparseOperator) -> Result<Llt<usize, f64>> {
        let sym =
            SymbolicSparseColMatRef::new_checked(a.nrows, a.ncols, &a.row_ptr, None, &a.col_idx);
        let mat = SparseColMatRef::new(sym, &a.values);
        let llt = Llt::try_new_with_symbolic(symbolic, mat, Side::Lower).map_err(|e| {
            FemError::Configuration(format!("matrix is not positive definite: {e:?}"))
        })?;
        // rounding can let a zero pivot through; a singular factor fails to
        // reproduce a generic vector
        let v: Vec<f64> = (0..a.nrows)
            .map(|i| 1.0 + 0.5 * (1.3 * i as f64).sin())
            .collect();
        let mut x = a.matvec(&v);
        llt.solve_in_place_with_conj(
            faer::Conj::No,
            MatMut::from_column_major_slice_mut(&mut x, a.nrows, 1),
        );
        let err = norm(&x.iter().zip(&v).map(|(x, v)| x - v).collect::<Vec<_>>())
            / norm(&v).max(f64::MIN_POSITIVE);
        if !(err <= SINGULARITY_TOL) {
            return Err(FemError::Configuration(format!(
                "matrix is numerically singular (roundtrip error {err:.2e})"
            )));
        }
        Ok(llt)
    }

    /// Factors `a`, reusing the symbolic analysis if the pattern matches.
    pub fn refactor(&mut self, a: &SparseOperator) -> Result<()> {
        if a.row_ptr == self.row_ptr && a.col_idx == self.col_idx {
            self.llt = Self::numeric(self.symbolic.clone(), a)?;
            Ok(())
        } else {
            *self = Self::factor(a)?;
            Ok(())
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs dimension mismatch");
        let mut x = b.to_vec();
        let n = self.n;
        let mat = MatMut::from_column_major_slice_mut(&mut x, n, 1);
        self.llt.solve_in_place_with_conj(faer::Conj::No, mat);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let a = SparseOperator::from_triplets(
            2,
            2,
            &[
                (0, 0, 1.0),
                (1, 1, 2.0),
                (0, 0, 1.0),
                (0, 1, 1.0),
                (1, 0, 1.0),
            ],
            true,
        );
        assert_eq!(a.to_dense(), vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert_eq!(a.nnz(), 4);
        assert_eq!(a.matvec(&[1.0, 1.0]), vec![3.0, 3.0]);
        assert_eq!(a.transpose_matvec(&[1.0, 0.0]), vec![2.0, 1.0]);
        assert_eq!(a.symmetry_defect(), 0.0);
    }

    #[test]
    fn cholesky_solves_small_spd() {
        let a = SparseOperator::from_triplets(
            2,
            2,
            &[(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)],
            true,
        );
        let mut c = Cholesky::factor(&a).unwrap();
        let x = c.solve(&[1.0, 1.0]);
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
        let b = a.scaled(2.0);
        c.refactor(&b).unwrap();
        let x = c.solve(&[1.0, 1.0]);
        assert!((x[0] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SparseOperator::diagonal_matrix(&[1.0, -1.0]);
        assert!(Cholesky::factor(&a).is_err());
    }

    #[test]
    fn weighted_gram_matches_dense_product() {
        let b = SparseOperator::from_triplets(
            2,
            3,
            &[(0, 0, 1.0), (0, 2, -2.0), (1, 1, 3.0), (1, 2, 1.0)],
            false,
        );
        let g = b.weighted_gram(&[2.0, 0.5]);
        let bd = b.to_dense();
        for i in 0..3 {
            for j in 0..3 {
                let e = 2.0 * bd[0][i] * bd[0][j] + 0.5 * bd[1][i] * bd[1][j];
                assert!((g.get(i, j) - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn restrict_drops_constrained() {
        let a = SparseOperator::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (0, 2, 4.0)],
            false,
        );
        let m = DofMap::from_constraints(&[false, true, false]);
        let r = a.restrict(&m, &m);
        assert_eq!(r.to_dense(), vec![vec![1.0, 4.0], vec![0.0, 3.0]]);
    }
}
