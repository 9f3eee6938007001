//! Method-specific kernel pairs `(M, N)` whose leading generalized
//! eigenvectors estimate the central subspace.
//!
//! All sample moments use divisor `n`, so that slice-weighted averages of
//! within-slice moments reproduce the pooled moments exactly.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CiseError, Result};
use crate::linalg::{inv_sqrt, sqrt_psd, sym_eig, SymMatrix, DEFAULT_CLAMP};

pub const DEFAULT_SLICES: usize = 6;

/// Predictors paired with a scalar response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// Validates shape and finiteness. Requires `n > p` and `n >= 2`.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(CiseError::InvalidInput(format!(
                "response has {} entries but predictors have {n} rows",
                y.len()
            )));
        }
        if p == 0 {
            return Err(CiseError::InvalidInput("at least one predictor is required".into()));
        }
        if n < 2 {
            return Err(CiseError::InvalidInput("at least two observations are required".into()));
        }
        if n <= p {
            return Err(CiseError::InvalidInput(format!(
                "need more observations than predictors (n = {n}, p = {p})"
            )));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(CiseError::InvalidInput("data contain non-finite values".into()));
        }
        Ok(Dataset { x, y })
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn center_cov(&self) -> Result<(DVector<f64>, SymMatrix)> {
        center_cov(&self.x)
    }

    /// Dataset restricted to the given predictor columns.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        if cols.iter().any(|&c| c >= self.p()) {
            return Err(CiseError::InvalidInput("column index out of range".into()));
        }
        let x = DMatrix::from_fn(self.n(), cols.len(), |i, j| self.x[(i, cols[j])]);
        Dataset::new(x, self.y.clone())
    }

    /// Rescales every predictor to unit (divisor-n) variance.
    pub fn standardized(&self) -> Result<Dataset> {
        let (_, sigma) = self.center_cov()?;
        let mut x = self.x.clone();
        for j in 0..self.p() {
            let sd = sigma.as_matrix()[(j, j)].sqrt();
            if sd == 0.0 {
                return Err(CiseError::InvalidInput(format!("predictor {j} is constant")));
            }
            x.column_mut(j).unscale_mut(sd);
        }
        Dataset::new(x, self.y.clone())
    }
}

/// Column means and the divisor-`n` covariance of the rows of `x`.
pub fn center_cov(x: &DMatrix<f64>) -> Result<(DVector<f64>, SymMatrix)> {
    let n = x.nrows();
    if n < 2 {
        return Err(CiseError::InvalidInput("covariance needs at least two rows".into()));
    }
    let mean = x.row_mean().transpose();
    let centered = centered(x, &mean);
    let cov = centered.transpose() * &centered / n as f64;
    Ok((mean, SymMatrix::symmetrized(cov)))
}

fn centered(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= mean.transpose();
    }
    c
}

/// Equal-frequency partition of the observations by response rank.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceAssignment {
    pub labels: Vec<usize>,
    pub h: usize,
    pub counts: Vec<usize>,
}

impl SliceAssignment {
    /// Observation indices belonging to slice `s`, in original order.
    pub fn members(&self, s: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == s).then_some(i))
            .collect()
    }
}

/// Slices the sorted response into `h` groups whose sizes differ by at most one.
///
/// The first `n % h` slices receive the extra observation; tied responses keep
/// their original relative order.
pub fn slice_response(y: &DVector<f64>, h: usize) -> Result<SliceAssignment> {
    let n = y.len();
    if h < 2 {
        return Err(CiseError::InvalidInput(format!("slice count must be at least 2, got {h}")));
    }
    if h > n {
        return Err(CiseError::InvalidInput(format!(
            "slice count {h} exceeds number of observations {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]));

    let base = n / h;
    let extra = n % h;
    let counts: Vec<usize> = (0..h).map(|s| base + usize::from(s < extra)).collect();
    let mut labels = vec![0; n];
    let mut pos = 0;
    for (s, &c) in counts.iter().enumerate() {
        for &obs in &order[pos..pos + c] {
            labels[obs] = s;
        }
        pos += c;
    }
    Ok(SliceAssignment { labels, h, counts })
}

/// Response transformation `f(y)` used by principal fitted components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FBasis {
    /// `(|y|, y, y²)`
    AbsLinQuad,
    /// `(√y, y, y²)`, only defined for positive responses.
    SqrtLinQuad,
    /// `y`
    Linear,
}

impl FBasis {
    pub fn dim(&self) -> usize {
        match self {
            FBasis::AbsLinQuad | FBasis::SqrtLinQuad => 3,
            FBasis::Linear => 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FBasis::AbsLinQuad => "abs-lin-quad",
            FBasis::SqrtLinQuad => "sqrt-lin-quad",
            FBasis::Linear => "linear",
        }
    }

    /// Evaluates `f` row by row into an `n x r` matrix.
    pub fn evaluate(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = y.len();
        match self {
            FBasis::AbsLinQuad => Ok(DMatrix::from_fn(n, 3, |i, j| {
                let v = y[i];
                [v.abs(), v, v * v][j]
            })),
            FBasis::SqrtLinQuad => {
                if let Some(bad) = y.iter().find(|v| **v <= 0.0) {
                    return Err(CiseError::Domain(format!(
                        "sqrt-lin-quad basis requires positive responses, found {bad}"
                    )));
                }
                Ok(DMatrix::from_fn(n, 3, |i, j| {
                    let v = y[i];
                    [v.sqrt(), v, v * v][j]
                }))
            }
            FBasis::Linear => Ok(DMatrix::from_fn(n, 1, |i, _| y[i])),
        }
    }
}

impl fmt::Display for FBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Pca,
    Pfc,
    Sir,
    Save,
    Dr,
}

/// Fully specified kernel construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Pca,
    Pfc { basis: FBasis, isotropic: bool },
    Sir { slices: usize },
    Save { slices: usize },
    Dr { slices: usize },
}

impl Method {
    pub fn tag(&self) -> MethodTag {
        match self {
            Method::Pca => MethodTag::Pca,
            Method::Pfc { .. } => MethodTag::Pfc,
            Method::Sir { .. } => MethodTag::Sir,
            Method::Save { .. } => MethodTag::Save,
            Method::Dr { .. } => MethodTag::Dr,
        }
    }

    pub fn pfc(basis: FBasis) -> Self {
        Method::Pfc { basis, isotropic: false }
    }

    pub fn sir() -> Self {
        Method::Sir { slices: DEFAULT_SLICES }
    }

    /// Upper bound on the rank of `M` implied by the construction, if any.
    pub fn max_rank(&self) -> Option<usize> {
        match self {
            Method::Pfc { basis, .. } => Some(basis.dim()),
            Method::Sir { slices } => Some(slices - 1),
            _ => None,
        }
    }

    pub fn build(&self, data: &Dataset) -> Result<KernelPair> {
        match *self {
            Method::Pca => kernel_pca(data),
            Method::Pfc { basis, isotropic } => kernel_pfc(data, basis, isotropic),
            Method::Sir { slices } => kernel_sir(data, slices),
            Method::Save { slices } => kernel_save(data, slices),
            Method::Dr { slices } => kernel_dr(data, slices),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelMeta {
    None,
    Slices(usize),
    Basis { basis: FBasis, isotropic: bool },
}

/// The symmetric matrices `M` (PSD) and `N` (PD) of the generalized eigenproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelPair {
    pub m: SymMatrix,
    pub nn: SymMatrix,
    pub method: MethodTag,
    pub meta: KernelMeta,
}

impl KernelPair {
    /// Validates dimensions and positive definiteness of `nn`.
    pub fn new(m: SymMatrix, nn: SymMatrix, method: MethodTag, meta: KernelMeta) -> Result<Self> {
        if m.dim() != nn.dim() {
            return Err(CiseError::InvalidInput(format!(
                "kernel dimensions differ: {} vs {}",
                m.dim(),
                nn.dim()
            )));
        }
        let e = sym_eig(&nn)?;
        let smallest = e.values[e.values.len() - 1];
        if smallest <= 0.0 {
            return Err(CiseError::SingularMatrix { eigenvalue: smallest, threshold: 0.0 });
        }
        sym_eig(&m)?;
        Ok(KernelPair { m, nn, method, meta })
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    /// Kernel pair restricted to the given coordinates.
    pub fn restrict(&self, idx: &[usize]) -> KernelPair {
        KernelPair {
            m: self.m.principal(idx),
            nn: self.nn.principal(idx),
            method: self.method,
            meta: self.meta.clone(),
        }
    }
}

pub fn kernel_pca(data: &Dataset) -> Result<KernelPair> {
    let (_, sigma) = data.center_cov()?;
    KernelPair::new(sigma, SymMatrix::identity(data.p()), MethodTag::Pca, KernelMeta::None)
}

struct SliceMoments {
    weight: f64,
    mean: DVector<f64>,
    /// Divisor-n_s covariance, present only when requested.
    cov: Option<DMatrix<f64>>,
}

fn slice_moments(rows: &DMatrix<f64>, slices: &SliceAssignment, with_cov: bool) -> Vec<SliceMoments> {
    let n = rows.nrows() as f64;
    (0..slices.h)
        .map(|s| {
            let members = slices.members(s);
            let sub = crate::linalg::select_rows(rows, &members);
            let ns = members.len() as f64;
            let mean = sub.row_mean().transpose();
            let cov = with_cov.then(|| {
                let c = centered(&sub, &mean);
                c.transpose() * &c / ns
            });
            SliceMoments { weight: ns / n, mean, cov }
        })
        .collect()
}

fn checked_slices(data: &Dataset, h: usize, min_size: usize) -> Result<SliceAssignment> {
    let slices = slice_response(data.y(), h)?;
    if let Some((s, &c)) = slices.counts.iter().enumerate().find(|(_, &c)| c < min_size) {
        return Err(CiseError::Slice(format!(
            "slice {s} has {c} observations, at least {min_size} required"
        )));
    }
    Ok(slices)
}

/// Sliced inverse regression: weighted covariance of the slice means.
pub fn kernel_sir(data: &Dataset, h: usize) -> Result<KernelPair> {
    let slices = checked_slices(data, h, 1)?;
    let (mean, sigma) = data.center_cov()?;
    let p = data.p();
    let mut m = DMatrix::zeros(p, p);
    for sm in slice_moments(data.x(), &slices, false) {
        let dev = &sm.mean - &mean;
        m += (&dev * dev.transpose()) * sm.weight;
    }
    KernelPair::new(SymMatrix::symmetrized(m), sigma, MethodTag::Sir, KernelMeta::Slices(h))
}

/// Standardized predictors `z = Σ^{-1/2}(x - x̄)` together with `Σ^{1/2}` and `Σ`.
fn standardize(data: &Dataset) -> Result<(DMatrix<f64>, SymMatrix, SymMatrix)> {
    let (mean, sigma) = data.center_cov()?;
    let root = sqrt_psd(&sigma)?;
    let inv_root = inv_sqrt(&sigma, DEFAULT_CLAMP)?;
    let z = centered(data.x(), &mean) * inv_root.as_matrix();
    Ok((z, root, sigma))
}

/// Sliced average variance estimation.
pub fn kernel_save(data: &Dataset, h: usize) -> Result<KernelPair> {
    let slices = checked_slices(data, h, 2)?;
    let (z, root, sigma) = standardize(data)?;
    let p = data.p();
    let eye = DMatrix::<f64>::identity(p, p);
    let mut inner = DMatrix::zeros(p, p);
    for sm in slice_moments(&z, &slices, true) {
        let dev = &eye - sm.cov.expect("covariance requested");
        inner += (&dev * &dev) * sm.weight;
    }
    let m = root.as_matrix() * inner * root.as_matrix();
    KernelPair::new(SymMatrix::symmetrized(m), sigma, MethodTag::Save, KernelMeta::Slices(h))
}

/// Directional regression.
///
/// With slice second moments `A_s = E(zzᵀ|s)`, means `b_s = E(z|s)` and
/// weights `w_s`, the kernel is
/// `Σ^{1/2} {2 Σ w_s A_s² + 2 B² + 2 (Σ w_s b_sᵀb_s) B − 2I} Σ^{1/2}`
/// where `B = Σ w_s b_s b_sᵀ`.
pub fn kernel_dr(data: &Dataset, h: usize) -> Result<KernelPair> {
    let slices = checked_slices(data, h, 2)?;
    let (z, root, sigma) = standardize(data)?;
    let p = data.p();
    let mut second = DMatrix::zeros(p, p);
    let mut between = DMatrix::zeros(p, p);
    let mut mean_sq = 0.0;
    for sm in slice_moments(&z, &slices, true) {
        let outer = &sm.mean * sm.mean.transpose();
        let a = sm.cov.expect("covariance requested") + &outer;
        second += (&a * &a) * sm.weight;
        between += &outer * sm.weight;
        mean_sq += sm.weight * sm.mean.norm_squared();
    }
    let eye = DMatrix::<f64>::identity(p, p);
    let inner = (second + &between * &between + &between * mean_sq - eye) * 2.0;
    let m = root.as_matrix() * inner * root.as_matrix();
    KernelPair::new(SymMatrix::symmetrized(m), sigma, MethodTag::Dr, KernelMeta::Slices(h))
}

/// Principal fitted components: `M` is the covariance of the fitted values from
/// the least-squares regression of `x` on `f(y)`.
///
/// `isotropic` selects `N = I` instead of `N = Σ`.
pub fn kernel_pfc(data: &Dataset, basis: FBasis, isotropic: bool) -> Result<KernelPair> {
    let n = data.n() as f64;
    let f = basis.evaluate(data.y())?;
    let f_mean = f.row_mean().transpose();
    let fc = centered(&f, &f_mean);
    let (x_mean, sigma) = data.center_cov()?;
    let xc = centered(data.x(), &x_mean);

    let gram = SymMatrix::symmetrized(fc.transpose() * &fc / n);
    let ge = sym_eig(&gram)?;
    let top = ge.values[0];
    let smallest = ge.values[ge.values.len() - 1];
    if top <= 0.0 || smallest <= 1e-12 * top {
        return Err(CiseError::RankDeficientBasis);
    }
    let gram_inv = ge.vectors.clone()
        * DMatrix::from_diagonal(&ge.values.map(|l| 1.0 / l))
        * ge.vectors.transpose();

    // Σ_fit = Σ_xf Σ_ff^{-1} Σ_fx
    let cross = xc.transpose() * &fc / n;
    let m = &cross * gram_inv * cross.transpose();
    let nn = if isotropic { SymMatrix::identity(data.p()) } else { sigma };
    KernelPair::new(
        SymMatrix::symmetrized(m),
        nn,
        MethodTag::Pfc,
        KernelMeta::Basis { basis, isotropic },
    )
}
