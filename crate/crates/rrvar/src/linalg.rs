//! Dense linear-algebra substrate shared by the estimation modules.
//!
//! Everything here operates on `f64` matrices from [`nalgebra`]. The module
//! adds the few conventions the estimators rely on: a symmetric-matrix
//! carrier that is exactly symmetric by construction, a deterministic
//! symmetric eigendecomposition (descending eigenvalues, fixed sign
//! convention), Kronecker/vec helpers and a Cholesky wrapper.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symmetric matrix, exactly symmetric by construction.
///
/// Only the lower triangle of the input is read; the upper triangle is
/// mirrored from it, so `entries[i][j] == entries[j][i]` holds bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    data: DMatrix<f64>,
}

impl SymMatrix {
    /// Build from a dense square matrix, mirroring the lower triangle.
    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix with dim >= 1, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let mut data = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                data[(i, j)] = m[(i, j)];
                data[(j, i)] = m[(i, j)];
            }
        }
        Ok(Self { data })
    }

    /// Build from an entry function; only `f(i, j)` with `i >= j` is called.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in j..dim {
                let v = f(i, j);
                data[(i, j)] = v;
                data[(j, i)] = v;
            }
        }
        Self { data }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            data: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            data: DMatrix::from_diagonal(&DVector::from_row_slice(diag)),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Eigendecomposition of a symmetric matrix.
///
/// Eigenvalues are sorted descending and column `i` of `vectors` pairs with
/// `values[i]`. Within each eigenvector the entry of largest absolute value
/// is made non-negative (ties broken by lowest index), which fixes the
/// reflection ambiguity and makes the decomposition deterministic.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenSystem {
    /// Reconstruct `vectors * diag(values) * vectors^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.vectors * DMatrix::from_diagonal(&self.values) * self.vectors.transpose()
    }
}

/// Symmetric eigendecomposition with descending eigenvalues and fixed signs.
pub fn eigh(m: &SymMatrix) -> Result<EigenSystem> {
    if !m.is_finite() {
        return Err(Error::InvalidInput("non-finite matrix entries".into()));
    }
    let decomp = m.data.clone().symmetric_eigen();
    let n = m.dim();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| decomp.eigenvalues[b].total_cmp(&decomp.eigenvalues[a]));

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = decomp.eigenvalues[src];
        vectors.set_column(dst, &decomp.eigenvectors.column(src));
    }
    fix_signs(&mut vectors);
    Ok(EigenSystem { values, vectors })
}

/// Flip column signs so the largest-|entry| coordinate is non-negative.
pub(crate) fn fix_signs(vectors: &mut DMatrix<f64>) {
    for mut col in vectors.column_iter_mut() {
        let mut idx = 0;
        let mut best = -1.0;
        for (i, &v) in col.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                idx = i;
            }
        }
        if col[idx] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-stacking operator.
pub fn vec_of(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), rows * cols, "unvec length mismatch");
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Lower-triangular Cholesky factor `L` with `L L^T = m`.
pub fn chol(m: &SymMatrix) -> Result<DMatrix<f64>> {
    m.data
        .clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

/// Ratio of extreme eigenvalues; `+inf` when the smallest is `<= 0`.
pub fn condition_number(m: &SymMatrix) -> f64 {
    let eig = match eigh(m) {
        Ok(e) => e,
        Err(_) => return f64::INFINITY,
    };
    let n = m.dim();
    let largest = eig.values[0];
    let smallest = eig.values[n - 1];
    if smallest <= 0.0 {
        f64::INFINITY
    } else {
        largest / smallest
    }
}
