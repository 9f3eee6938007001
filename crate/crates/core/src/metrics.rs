//! Subspace distance and variable-selection accuracy.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CiseError, Result};
use crate::linalg::{sym_eig, SymMatrix};

/// Orthogonal projection onto the column span of `a`, in the standard inner product.
pub fn projection(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = orthonormal_basis(a)?;
    Ok(&q * q.transpose())
}

/// Orthonormal basis of the column span via Householder QR.
fn orthonormal_basis(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = SymMatrix::new(a.transpose() * a)?;
    let e = sym_eig(&gram)?;
    let top = e.values[0];
    let smallest = e.values[e.values.len() - 1];
    if !(top > 0.0) || smallest <= 1e-12 * top {
        return Err(CiseError::RankDeficient);
    }
    Ok(a.clone().qr().q())
}

/// Spectral norm of `(I − Q_a Q_aᵀ) q_b`.
fn residual_norm(qa: &DMatrix<f64>, qb: &DMatrix<f64>) -> Result<f64> {
    let r = qb - qa * (qa.transpose() * qb);
    let top = sym_eig(&SymMatrix::new(r.transpose() * &r)?)?.values[0];
    Ok(top.max(0.0).sqrt())
}

/// Largest singular value of `P_a − P_b`.
///
/// Lies in `[0, 1]` and is zero exactly when the spans coincide. Projections
/// always use the standard inner product, even for bases that are orthonormal
/// in some other metric. Computed as the larger of the two one-sided residuals
/// `‖(I − P_a) Q_b‖` and `‖(I − P_b) Q_a‖`, which avoids the cancellation in
/// forming `P_a − P_b` for nearby subspaces.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.nrows() != b.nrows() {
        return Err(CiseError::InvalidInput(format!(
            "bases live in different spaces: {} vs {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let (qa, qb) = (orthonormal_basis(a)?, orthonormal_basis(b)?);
    Ok(residual_norm(&qa, &qb)?.max(residual_norm(&qb, &qa)?).min(1.0))
}

/// Per-replication contribution to the selection rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Fraction of relevant variables that were kept.
    pub relevant_hit_fraction: f64,
    /// Fraction of irrelevant variables that were dropped.
    pub irrelevant_zero_fraction: f64,
    pub exact: bool,
}

/// Scores a selected (0-based) active set against the known relevant set.
pub fn selection_outcome(active: &[usize], relevant: &[usize], p: usize) -> Result<SelectionOutcome> {
    if relevant.is_empty() {
        return Err(CiseError::InvalidInput("relevant set must be nonempty".into()));
    }
    if let Some(bad) = active.iter().chain(relevant).find(|&&i| i >= p) {
        return Err(CiseError::InvalidInput(format!("index {bad} outside 0..{p}")));
    }
    let active: BTreeSet<usize> = active.iter().copied().collect();
    let relevant: BTreeSet<usize> = relevant.iter().copied().collect();

    let hits = active.intersection(&relevant).count();
    let irrelevant = p - relevant.len();
    let zeros = (0..p).filter(|i| !active.contains(i) && !relevant.contains(i)).count();

    let relevant_hit_fraction = hits as f64 / relevant.len() as f64;
    let irrelevant_zero_fraction = if irrelevant == 0 { 1.0 } else { zeros as f64 / irrelevant as f64 };
    Ok(SelectionOutcome {
        relevant_hit_fraction,
        irrelevant_zero_fraction,
        exact: active == relevant,
    })
}
