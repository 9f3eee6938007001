//! Ordinary and sparse subspace estimation for a kernel pair.
//!
//! The unpenalized estimator solves `M δ = λ N δ` through the symmetric
//! problem `G = N^{-1/2} M N^{-1/2}`. The sparse estimator adds the row-group
//! penalty `Σ θ_i ‖v_i‖₂` and is fitted by local quadratic approximation: each
//! step replaces the penalty by `½ tr(Vᵀ H V)` with `H = diag(θ_i / ‖v_i‖₂)`
//! and takes the leading eigenvectors of `G − ½ N^{-1/2} H N^{-1/2}`.
//! Variables whose rows fall below `eps` are removed from the problem for good.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CiseError, Result};
use crate::kernels::KernelPair;
use crate::linalg::{embed_rows, inv_sqrt, row_norms, select_rows, sym_eig, EigenDecomp, SymMatrix, DEFAULT_CLAMP};
use crate::metrics::subspace_distance;

/// Spectral gap below which the leading subspace is treated as not identified.
pub const DEGENERATE_GAP: f64 = 1e-8;

/// Row norm below which an adaptive weight is treated as infinite.
pub const FROZEN_NORM: f64 = 1e-12;

/// A `p x d` basis satisfying `Vᵀ N V = I_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Basis {
    v: DMatrix<f64>,
}

impl Basis {
    /// Checks `1 <= d <= p` and N-orthonormality to `1e-8` per entry.
    pub fn new(v: DMatrix<f64>, nn: &SymMatrix) -> Result<Self> {
        let (p, d) = v.shape();
        if d == 0 || d > p {
            return Err(CiseError::InvalidInput(format!("basis must be p x d with 1 <= d <= p, got {p}x{d}")));
        }
        if nn.dim() != p {
            return Err(CiseError::InvalidInput("basis and N have different dimensions".into()));
        }
        let err = orthonormality_error(&v, nn);
        if !(err <= 1e-8) {
            return Err(CiseError::InvalidInput(format!("basis is not N-orthonormal (error {err:e})")));
        }
        Ok(Basis { v })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn p(&self) -> usize {
        self.v.nrows()
    }

    pub fn d(&self) -> usize {
        self.v.ncols()
    }

    pub fn row_norms(&self) -> Vec<f64> {
        row_norms(&self.v)
    }
}

/// `max |Vᵀ N V − I|`.
pub fn orthonormality_error(v: &DMatrix<f64>, nn: &SymMatrix) -> f64 {
    let d = v.ncols();
    let gram = v.transpose() * nn.as_matrix() * v - DMatrix::<f64>::identity(d, d);
    gram.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Per-variable penalty parameters.
///
/// A frozen variable carries a conceptually infinite weight: it is excluded
/// from every fit and its row is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyWeights {
    theta: Vec<f64>,
    frozen: Vec<bool>,
}

impl PenaltyWeights {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(CiseError::InvalidInput("penalty weights must be finite and nonnegative".into()));
        }
        let frozen = vec![false; theta.len()];
        Ok(PenaltyWeights { theta, frozen })
    }

    pub fn zeros(p: usize) -> Self {
        PenaltyWeights { theta: vec![0.0; p], frozen: vec![false; p] }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Finite weight of variable `i`; `None` when frozen.
    pub fn weight(&self, i: usize) -> Option<f64> {
        (!self.frozen[i]).then(|| self.theta[i])
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    pub fn frozen(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.frozen[i]).collect()
    }
}

/// `ρ(V) = Σ θ_i ‖v_i‖₂`. A frozen variable with a nonzero row gives `+∞`.
pub fn penalty_rho(v: &DMatrix<f64>, w: &PenaltyWeights) -> f64 {
    assert_eq!(v.nrows(), w.len(), "penalty weights do not match basis rows");
    row_norms(v)
        .into_iter()
        .enumerate()
        .map(|(i, norm)| match w.weight(i) {
            Some(t) => t * norm,
            None if norm == 0.0 => 0.0,
            None => f64::INFINITY,
        })
        .sum()
}

/// Adaptive weights `θ_i = θ ‖v̂_i‖₂^{-r}` from an unpenalized basis.
pub fn adaptive_weights(vhat: &Basis, theta: f64, r: f64) -> Result<PenaltyWeights> {
    if !(theta >= 0.0) || !theta.is_finite() {
        return Err(CiseError::InvalidInput(format!("theta must be finite and nonnegative, got {theta}")));
    }
    if !(r > 0.0) {
        return Err(CiseError::InvalidInput(format!("exponent r must be positive, got {r}")));
    }
    let norms = vhat.row_norms();
    if theta == 0.0 {
        return Ok(PenaltyWeights::zeros(norms.len()));
    }
    let mut w = PenaltyWeights::zeros(norms.len());
    for (i, norm) in norms.into_iter().enumerate() {
        if norm < FROZEN_NORM {
            w.frozen[i] = true;
        } else {
            w.theta[i] = theta * norm.powf(-r);
        }
    }
    Ok(w)
}

/// Unpenalized fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OsdreFit {
    pub basis: Basis,
    /// Leading `d` eigenvalues of `G`, descending.
    pub eigenvalues: Vec<f64>,
    /// `λ_d − λ_{d+1}`; absent when `d = p`.
    pub eigen_gap: Option<f64>,
    pub degenerate: bool,
}

pub fn osdre(kp: &KernelPair, d: usize) -> Result<OsdreFit> {
    CiseProblem::new(kp)?.osdre(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiseOptions {
    /// Row norm below which a variable is removed.
    pub eps: f64,
    /// Subspace-distance threshold between successive iterates.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CiseOptions {
    fn default() -> Self {
        CiseOptions { eps: 1e-6, tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    /// Penalized objective at the iterate, over the active coordinates.
    pub objective: f64,
    /// Distance between this iterate and the previous one.
    pub step: f64,
    pub active: usize,
    /// Whether variables were removed at the end of this iteration.
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    /// Rows outside `active` are exactly zero.
    pub basis: Basis,
    /// Sorted 0-based indices of retained variables.
    pub active: Vec<usize>,
    /// Leading eigenvalues of the final working eigenproblem.
    pub eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// `λ_d − λ_{d+1}` of the full `G`; absent when `d = p`.
    pub eigen_gap: Option<f64>,
    pub degenerate: bool,
    pub trace: Vec<IterRecord>,
}

impl SparseEstimate {
    pub fn p_active(&self) -> usize {
        self.active.len()
    }
}

pub fn cise_fit(kp: &KernelPair, d: usize, w: &PenaltyWeights, opts: &CiseOptions) -> Result<SparseEstimate> {
    CiseProblem::new(kp)?.fit(d, w, opts, None)
}

/// `G` and `N^{-1/2}` on a subset of coordinates.
#[derive(Debug, Clone)]
struct Working {
    g: DMatrix<f64>,
    nn: DMatrix<f64>,
    nn_inv_sqrt: DMatrix<f64>,
}

impl Working {
    fn new(kp: &KernelPair, idx: &[usize]) -> Result<Self> {
        let sub = kp.restrict(idx);
        let nis = inv_sqrt(&sub.nn, DEFAULT_CLAMP)?.into_inner();
        let g = SymMatrix::symmetrized(&nis * sub.m.as_matrix() * &nis).into_inner();
        Ok(Working { g, nn: sub.nn.into_inner(), nn_inv_sqrt: nis })
    }
}

/// A kernel pair with the full-coordinate decomposition of `G` cached, so
/// repeated fits over a tuning grid share it.
#[derive(Debug, Clone)]
pub struct CiseProblem<'a> {
    kp: &'a KernelPair,
    full: Working,
    eig: EigenDecomp,
}

impl<'a> CiseProblem<'a> {
    pub fn new(kp: &'a KernelPair) -> Result<Self> {
        let all: Vec<usize> = (0..kp.dim()).collect();
        let full = Working::new(kp, &all)?;
        let eig = sym_eig(&SymMatrix::symmetrized(full.g.clone()))?;
        Ok(CiseProblem { kp, full, eig })
    }

    pub fn p(&self) -> usize {
        self.kp.dim()
    }

    /// `tr(G)`.
    pub fn trace_g(&self) -> f64 {
        self.eig.values.sum()
    }

    fn check_d(&self, d: usize) -> Result<()> {
        if d == 0 || d > self.p() {
            return Err(CiseError::InvalidInput(format!("dimension d = {d} must lie in 1..={}", self.p())));
        }
        Ok(())
    }

    fn gap(&self, d: usize) -> (Option<f64>, bool) {
        if d >= self.p() {
            return (None, false);
        }
        let gap = self.eig.values[d - 1] - self.eig.values[d];
        (Some(gap), gap < DEGENERATE_GAP)
    }

    pub fn osdre(&self, d: usize) -> Result<OsdreFit> {
        self.check_d(d)?;
        let v = &self.full.nn_inv_sqrt * self.eig.leading_vectors(d);
        let (eigen_gap, degenerate) = self.gap(d);
        Ok(OsdreFit {
            basis: Basis::new(v, &self.kp.nn)?,
            eigenvalues: self.eig.leading_values(d),
            eigen_gap,
            degenerate,
        })
    }

    /// Sparse fit. `init`, if given, is a `p x d` starting basis; the default
    /// start is the unpenalized solution on the non-frozen variables.
    pub fn fit(
        &self,
        d: usize,
        w: &PenaltyWeights,
        opts: &CiseOptions,
        init: Option<&DMatrix<f64>>,
    ) -> Result<SparseEstimate> {
        self.check_d(d)?;
        let p = self.p();
        if w.len() != p {
            return Err(CiseError::InvalidInput(format!("{} penalty weights for {p} variables", w.len())));
        }
        if let Some(v0) = init {
            if v0.shape() != (p, d) {
                return Err(CiseError::InvalidInput("initial basis has the wrong shape".into()));
            }
        }

        let mut active: Vec<usize> = (0..p).filter(|&i| !w.is_frozen(i)).collect();
        if active.len() < d {
            return Err(CiseError::ActiveSetTooSmall { active: active.len(), d });
        }
        let mut theta: Vec<f64> = active.iter().map(|&i| w.theta[i]).collect();
        let mut work = if active.len() == p { self.full.clone() } else { Working::new(self.kp, &active)? };

        let mut eigenvalues;
        let mut v = match init {
            Some(v0) => {
                eigenvalues = Vec::new();
                select_rows(v0, &active)
            }
            None if active.len() == p => {
                eigenvalues = self.eig.leading_values(d);
                &work.nn_inv_sqrt * self.eig.leading_vectors(d)
            }
            None => {
                let e = sym_eig(&SymMatrix::symmetrized(work.g.clone()))?;
                eigenvalues = e.leading_values(d);
                &work.nn_inv_sqrt * e.leading_vectors(d)
            }
        };

        // Rows of the starting basis may already be negligible.
        if let Some(keep) = surviving(&v, &theta, opts.eps) {
            if keep.len() < d {
                return Err(CiseError::ActiveSetTooSmall { active: keep.len(), d });
            }
            active = keep.iter().map(|&i| active[i]).collect();
            theta = keep.iter().map(|&i| theta[i]).collect();
            work = Working::new(self.kp, &active)?;
            v = renormalize(&select_rows(&v, &keep), &work.nn)?;
        }

        let mut trace = Vec::new();
        let mut converged = false;
        let mut iterations = 0;
        while iterations < opts.max_iter {
            iterations += 1;

            // H N^{-1/2}, scaling row i by θ_i / ‖v_i‖.
            let norms = row_norms(&v);
            let mut h_nis = work.nn_inv_sqrt.clone();
            for (i, mut row) in h_nis.row_iter_mut().enumerate() {
                let h = if theta[i] > 0.0 { theta[i] / norms[i] } else { 0.0 };
                row *= h;
            }
            let working = &work.g - (&work.nn_inv_sqrt * h_nis) * 0.5;
            let e = sym_eig(&SymMatrix::symmetrized(working))?;
            let next = &work.nn_inv_sqrt * e.leading_vectors(d);
            eigenvalues = e.leading_values(d);
            let step = subspace_distance(&v, &next)?;
            v = next;

            let dropped = match surviving(&v, &theta, opts.eps) {
                None => false,
                Some(keep) => {
                    if keep.len() < d {
                        return Err(CiseError::ActiveSetTooSmall { active: keep.len(), d });
                    }
                    active = keep.iter().map(|&i| active[i]).collect();
                    theta = keep.iter().map(|&i| theta[i]).collect();
                    work = Working::new(self.kp, &active)?;
                    v = renormalize(&select_rows(&v, &keep), &work.nn)?;
                    true
                }
            };

            let sub_m = self.kp.m.principal(&active);
            trace.push(IterRecord {
                objective: objective(sub_m.as_matrix(), &v, &theta),
                step,
                active: active.len(),
                dropped,
            });

            if !dropped && step < opts.tol {
                converged = true;
                break;
            }
        }

        let v = renormalize(&v, &work.nn)?;
        let full_v = embed_rows(&v, &active, p);

        let sub_m = self.kp.m.principal(&active);
        let objective = objective(sub_m.as_matrix(), &v, &theta);
        let (eigen_gap, degenerate) = self.gap(d);
        Ok(SparseEstimate {
            basis: Basis::new(full_v, &self.kp.nn)?,
            active,
            eigenvalues,
            iterations,
            converged,
            objective,
            eigen_gap,
            degenerate,
            trace,
        })
    }
}

/// Re-imposes `Vᵀ N V = I` after rows were removed.
fn renormalize(v: &DMatrix<f64>, nn: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = SymMatrix::symmetrized(v.transpose() * nn * v);
    Ok(v * inv_sqrt(&gram, DEFAULT_CLAMP)?.as_matrix())
}

/// Positions to keep when some penalized row has fallen below `eps`.
fn surviving(v: &DMatrix<f64>, theta: &[f64], eps: f64) -> Option<Vec<usize>> {
    let norms = row_norms(v);
    let keep: Vec<usize> = (0..norms.len()).filter(|&i| !(theta[i] > 0.0 && norms[i] < eps)).collect();
    (keep.len() < norms.len()).then_some(keep)
}

/// `−tr(Vᵀ M V) + Σ θ_i ‖v_i‖`.
fn objective(m: &DMatrix<f64>, v: &DMatrix<f64>, theta: &[f64]) -> f64 {
    let fit = (v.transpose() * m * v).trace();
    let pen: f64 = row_norms(v).iter().zip(theta).map(|(n, t)| n * t).sum();
    pen - fit
}

/// `Q(V) = −tr(Vᵀ M V) + ρ(V)` on the full coordinates.
pub fn penalized_objective(m: &SymMatrix, v: &DMatrix<f64>, w: &PenaltyWeights) -> f64 {
    penalty_rho(v, w) - (v.transpose() * m.as_matrix() * v).trace()
}

/// Information criterion used to pick `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    Aic,
    Bic,
}

impl Rule {
    /// Penalty per effective parameter: `2/n` or `log(n)/n`.
    pub fn gamma(&self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            Rule::Aic => 2.0 / n,
            Rule::Bic => n.ln() / n,
        }
    }
}

/// Effective parameter count of a `d`-dimensional subspace of `R^{p_active}`.
pub fn degrees_of_freedom(p_active: usize, d: usize) -> usize {
    p_active.saturating_sub(d) * d
}

/// `count` log-spaced points between `lo` and `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

pub const DEFAULT_GRID_POINTS: usize = 30;
pub const DEFAULT_GRID_LO: f64 = 1e-4;
pub const DEFAULT_GRID_HI: f64 = 1e1;

/// 30 log-spaced points over `[1e-4, 1e1]`, scaled by `tr(G)/p`.
pub fn default_grid(kp: &KernelPair) -> Result<Vec<f64>> {
    let problem = CiseProblem::new(kp)?;
    Ok(scaled_default_grid(&problem))
}

fn scaled_default_grid(problem: &CiseProblem<'_>) -> Vec<f64> {
    let scale = problem.trace_g() / problem.p() as f64;
    log_grid(DEFAULT_GRID_LO, DEFAULT_GRID_HI, DEFAULT_GRID_POINTS)
        .into_iter()
        .map(|t| t * scale)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub theta: f64,
    /// `None` stands for `+∞`: the fit failed or did not converge.
    pub criterion: Option<f64>,
    pub p_active: Option<usize>,
    pub active: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    /// Criterion value of a non-converged fit, kept for diagnostics.
    pub raw_criterion: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningTrace {
    pub grid: Vec<GridPoint>,
    /// Index of the minimizer; `None` when every point failed.
    pub selected: Option<usize>,
    pub gamma_rule: Rule,
}

impl TuningTrace {
    pub fn selected_point(&self) -> Option<&GridPoint> {
        self.selected.map(|i| &self.grid[i])
    }

    /// Best-effort active set: the selected point, else the failed point with
    /// the smallest raw criterion.
    pub fn realized_active(&self) -> Vec<usize> {
        if let Some(gp) = self.selected_point() {
            return gp.active.clone();
        }
        self.grid
            .iter()
            .filter_map(|gp| gp.raw_criterion.map(|c| (c, gp)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, gp)| gp.active.clone())
            .unwrap_or_default()
    }
}

/// Which grid points to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    /// [`DEFAULT_GRID_POINTS`] points over `[1e-4, 1e1] · tr(G)/p`.
    Default,
    /// Absolute log-spaced grid.
    Log { lo: f64, hi: f64, count: usize },
    Explicit { values: Vec<f64> },
}

impl GridSpec {
    pub fn resolve(&self, problem: &CiseProblem<'_>) -> Result<Vec<f64>> {
        let grid = match self {
            GridSpec::Default => scaled_default_grid(problem),
            GridSpec::Log { lo, hi, count } => {
                if *count == 0 || !(*lo >= 0.0) || !(hi >= lo) || (*lo == 0.0 && *count > 1) {
                    return Err(CiseError::InvalidInput(format!("invalid log grid {lo}:{hi}:{count}")));
                }
                log_grid(*lo, *hi, *count)
            }
            GridSpec::Explicit { values } => values.clone(),
        };
        if grid.is_empty() || grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(CiseError::InvalidInput("theta grid must be nonempty and nonnegative".into()));
        }
        Ok(grid)
    }
}

/// Fits every grid point and returns the trace plus the selected estimate, if any.
///
/// The criterion is `−tr(Ṽᵀ M Ṽ) + γ (p_θ − d) d`. Ties go to the larger `θ`.
pub fn tune_trace(
    problem: &CiseProblem<'_>,
    d: usize,
    grid: &[f64],
    rule: Rule,
    r: f64,
    n: usize,
    opts: &CiseOptions,
) -> Result<(TuningTrace, Option<SparseEstimate>)> {
    if grid.is_empty() {
        return Err(CiseError::InvalidInput("theta grid is empty".into()));
    }
    let vhat = problem.osdre(d)?.basis;
    let gamma = rule.gamma(n);
    let m = &problem.kp.m;

    let fits: Vec<(GridPoint, Option<SparseEstimate>)> = grid
        .par_iter()
        .map(|&theta| {
            let result = adaptive_weights(&vhat, theta, r).and_then(|w| problem.fit(d, &w, opts, None));
            match result {
                Ok(est) => {
                    let v = est.basis.matrix();
                    let crit = -(v.transpose() * m.as_matrix() * v).trace()
                        + gamma * degrees_of_freedom(est.p_active(), d) as f64;
                    let gp = GridPoint {
                        theta,
                        criterion: est.converged.then_some(crit),
                        p_active: Some(est.p_active()),
                        active: est.active.clone(),
                        converged: est.converged,
                        iterations: est.iterations,
                        raw_criterion: Some(crit),
                        error: (!est.converged).then(|| "MaxIterExceeded".to_string()),
                    };
                    (gp, est.converged.then_some(est))
                }
                Err(e) => (
                    GridPoint {
                        theta,
                        criterion: None,
                        p_active: None,
                        active: Vec::new(),
                        converged: false,
                        iterations: 0,
                        raw_criterion: None,
                        error: Some(e.kind().to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut selected: Option<usize> = None;
    for (i, (gp, _)) in fits.iter().enumerate() {
        let Some(c) = gp.criterion else { continue };
        selected = match selected {
            None => Some(i),
            Some(j) => {
                let (best, best_theta) = (fits[j].0.criterion.unwrap(), fits[j].0.theta);
                if c < best || (c == best && gp.theta > best_theta) {
                    Some(i)
                } else {
                    Some(j)
                }
            }
        };
    }

    let mut points = Vec::with_capacity(fits.len());
    let mut chosen = None;
    for (i, (gp, est)) in fits.into_iter().enumerate() {
        if Some(i) == selected {
            chosen = est;
        }
        points.push(gp);
    }
    Ok((TuningTrace { grid: points, selected, gamma_rule: rule }, chosen))
}

/// Tunes `θ` over `grid` and returns the selected sparse estimate.
pub fn tune(
    kp: &KernelPair,
    d: usize,
    grid: &[f64],
    rule: Rule,
    r: f64,
    n: usize,
    opts: &CiseOptions,
) -> Result<(TuningTrace, SparseEstimate)> {
    let problem = CiseProblem::new(kp)?;
    let (trace, est) = tune_trace(&problem, d, grid, rule, r, n, opts)?;
    est.map(|e| (trace, e)).ok_or(CiseError::AllFitsFailed)
}
