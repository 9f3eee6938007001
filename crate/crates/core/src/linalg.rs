//! Dense symmetric linear algebra.
//!
//! Everything downstream (kernel construction, the eigen-solver iterations,
//! subspace distances) goes through the three primitives here, so they carry a
//! fixed ordering and sign convention: eigenvalues descending, and every
//! eigenvector oriented so that its first largest-magnitude entry is
//! nonnegative.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{CiseError, Result};

/// Relative eigenvalue floor for [`inv_sqrt`].
pub const DEFAULT_CLAMP: f64 = 1e-10;

/// Absolute tolerance below which a negative eigenvalue is rejected by [`sqrt_psd`].
pub const PSD_TOLERANCE: f64 = 1e-10;

/// A square symmetric matrix. Symmetry is enforced exactly on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds a symmetric matrix by averaging `a` with its transpose.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(CiseError::InvalidInput(format!(
                "matrix must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.nrows() == 0 {
            return Err(CiseError::InvalidInput("matrix dimension must be at least 1".into()));
        }
        Ok(Self::symmetrized(a))
    }

    pub(crate) fn symmetrized(mut a: DMatrix<f64>) -> Self {
        let n = a.nrows();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        SymMatrix(a)
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Principal submatrix on the given (ordered) coordinates.
    pub fn principal(&self, idx: &[usize]) -> SymMatrix {
        let k = idx.len();
        SymMatrix(DMatrix::from_fn(k, k, |i, j| self.0[(idx[i], idx[j])]))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Spectral decomposition with eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomp {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors, one per column, matching `values`.
    pub vectors: DMatrix<f64>,
}

impl EigenDecomp {
    /// The leading `k` eigenvectors as a `dim x k` matrix.
    pub fn leading_vectors(&self, k: usize) -> DMatrix<f64> {
        self.vectors.columns(0, k).into_owned()
    }

    pub fn leading_values(&self, k: usize) -> Vec<f64> {
        self.values.iter().take(k).copied().collect()
    }
}

pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomp> {
    if !a.is_finite() {
        return Err(CiseError::InvalidInput("matrix has non-finite entries".into()));
    }
    let n = a.dim();
    let raw = SymmetricEigen::new(a.0.clone());

    // Stable sort keeps the decomposition's own order among exact ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| raw.eigenvalues[j].total_cmp(&raw.eigenvalues[i]));

    let values = DVector::from_iterator(n, order.iter().map(|&k| raw.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = raw.eigenvectors.column(k).into_owned();
        orient(&mut v);
        vectors.set_column(col, &v);
    }
    Ok(EigenDecomp { values, vectors })
}

/// Flips `v` so that its first largest-magnitude entry is nonnegative.
fn orient(v: &mut DVector<f64>) {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if max == 0.0 {
        return;
    }
    // Entries equal to the maximum up to rounding count as ties; the first wins.
    let lead = v
        .iter()
        .position(|x| x.abs() >= max * (1.0 - 1e-12))
        .unwrap_or(0);
    if v[lead] < 0.0 {
        v.neg_mut();
    }
}

fn spectral_map(e: &EigenDecomp, f: impl Fn(f64) -> f64) -> SymMatrix {
    let scaled = DVector::from_iterator(e.values.len(), e.values.iter().map(|&l| f(l)));
    let mut left = e.vectors.clone();
    for (j, s) in scaled.iter().enumerate() {
        left.column_mut(j).scale_mut(*s);
    }
    SymMatrix::symmetrized(&left * e.vectors.transpose())
}

/// Inverse symmetric square root of a positive definite matrix.
///
/// Every eigenvalue must exceed `clamp` times the largest eigenvalue;
/// otherwise the offending eigenvalue is reported as [`CiseError::SingularMatrix`].
pub fn inv_sqrt(a: &SymMatrix, clamp: f64) -> Result<SymMatrix> {
    let e = sym_eig(a)?;
    let top = e.values[0];
    let smallest = e.values[e.values.len() - 1];
    let threshold = clamp * top.max(0.0);
    if top <= 0.0 || smallest <= threshold {
        return Err(CiseError::SingularMatrix { eigenvalue: smallest, threshold });
    }
    Ok(spectral_map(&e, |l| 1.0 / l.sqrt()))
}

/// Symmetric square root of a positive semidefinite matrix.
pub fn sqrt_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let e = sym_eig(a)?;
    let smallest = e.values[e.values.len() - 1];
    if smallest < -PSD_TOLERANCE {
        return Err(CiseError::NotPsd(smallest));
    }
    Ok(spectral_map(&e, |l| l.max(0.0).sqrt()))
}

/// Euclidean norm of every row of `v`.
pub fn row_norms(v: &DMatrix<f64>) -> Vec<f64> {
    v.row_iter().map(|r| r.norm()).collect()
}

/// Rows of `v` at the given indices, in order.
pub fn select_rows(v: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), v.ncols(), |i, j| v[(idx[i], j)])
}

/// Places the rows of `v` at positions `idx` of a `p`-row zero matrix.
pub fn embed_rows(v: &DMatrix<f64>, idx: &[usize], p: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(p, v.ncols());
    for (i, &row) in idx.iter().enumerate() {
        out.set_row(row, &v.row(i));
    }
    out
}
