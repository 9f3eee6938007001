//! Seeded Monte-Carlo studies and the paired bootstrap screen.
//!
//! Every replication draws from its own ChaCha8 stream seeded by mixing the
//! batch seed with the replication index, so results do not depend on how
//! replications are scheduled across threads.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CiseError, Result};
use crate::kernels::{Dataset, FBasis, Method};
use crate::linalg::{embed_rows, inv_sqrt, sqrt_psd, SymMatrix, DEFAULT_CLAMP};
use crate::metrics::{selection_outcome, subspace_distance, SelectionOutcome};
use crate::pipeline::{fit_dataset, FitConfig};
use crate::solver::{osdre, SparseEstimate};

pub const STUDY_P: usize = 24;
pub const DEFAULT_REPS: usize = 500;
const AR1_RHO: f64 = 0.5;

/// The four simulation designs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Study {
    /// `y = x1 + x2 + x3 + 0.5ε`
    One,
    /// `y = x1 + x2 + x3 + 2ε`
    Two,
    /// `y = x1 / {0.5 + (x2 + 1.5)²} + 0.2ε`
    Three,
    /// Inverse model `x = Γ(y, y²)ᵀ + Δ^{1/2}ε`
    Four,
}

impl TryFrom<u8> for Study {
    type Error = CiseError;

    fn try_from(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Study::One),
            2 => Ok(Study::Two),
            3 => Ok(Study::Three),
            4 => Ok(Study::Four),
            _ => Err(CiseError::InvalidInput(format!("study must be 1, 2, 3 or 4, got {k}"))),
        }
    }
}

impl From<Study> for u8 {
    fn from(s: Study) -> u8 {
        match s {
            Study::One => 1,
            Study::Two => 2,
            Study::Three => 3,
            Study::Four => 4,
        }
    }
}

impl Study {
    /// Dimension of the central subspace.
    pub fn d(&self) -> usize {
        match self {
            Study::One | Study::Two => 1,
            Study::Three | Study::Four => 2,
        }
    }

    /// 0-based indices of the relevant predictors.
    pub fn relevant(&self) -> Vec<usize> {
        match self {
            Study::One | Study::Two => vec![0, 1, 2],
            Study::Three => vec![0, 1],
            Study::Four => vec![0, 1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study: Study,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub seed: u64,
    pub fit: FitConfig,
}

impl StudyConfig {
    /// Defaults: `p = 24`, 500 replications, seed 0, BIC, the study's own `d`.
    pub fn new(study: Study, n: usize, method: Method) -> Self {
        StudyConfig {
            study,
            n,
            p: STUDY_P,
            reps: DEFAULT_REPS,
            seed: 0,
            fit: FitConfig::new(method, study.d()),
        }
    }

    /// PFC with `f(y) = (|y|, y, y²)`.
    pub fn pfc(study: Study, n: usize) -> Self {
        Self::new(study, n, Method::pfc(FBasis::AbsLinQuad))
    }

    pub fn sir(study: Study, n: usize) -> Self {
        Self::new(study, n, Method::sir())
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(CiseError::InvalidInput("reps must be at least 1".into()));
        }
        if self.p < 5 {
            return Err(CiseError::InvalidInput(format!("study designs need p >= 5, got {}", self.p)));
        }
        if self.n <= self.p {
            return Err(CiseError::InvalidInput(format!("need n > p (n = {}, p = {})", self.n, self.p)));
        }
        self.fit.validate()
    }
}

/// `Σ_ij = ρ^{|i−j|}`.
pub fn ar1_cov(p: usize, rho: f64) -> Result<SymMatrix> {
    if !(rho.abs() < 1.0) {
        return Err(CiseError::InvalidInput(format!("|rho| must be below 1, got {rho}")));
    }
    if p == 0 {
        return Err(CiseError::InvalidInput("dimension must be at least 1".into()));
    }
    SymMatrix::new(DMatrix::from_fn(p, p, |i, j| rho.powi(i.abs_diff(j) as i32)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `rep` within a batch seeded by `seed`.
pub fn child_seed(seed: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ rep.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn child_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, rep))
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    // Row-major draw order.
    DMatrix::from_row_iterator(rows, cols, (0..rows * cols).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// One simulated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct StudyData {
    pub data: Dataset,
    /// 0-based indices.
    pub relevant: Vec<usize>,
    /// A basis of the true central subspace.
    pub true_basis: DMatrix<f64>,
}

/// Study-4 loading matrix `Γ`.
fn study4_gamma(p: usize) -> DMatrix<f64> {
    let mut gamma = DMatrix::zeros(p, 2);
    for i in 0..4 {
        gamma[(i, 0)] = 0.5;
        gamma[(i, 1)] = if i % 2 == 0 { 0.5 } else { -0.5 };
    }
    gamma
}

pub fn generate_study(cfg: &StudyConfig, rep: usize) -> Result<StudyData> {
    let (n, p) = (cfg.n, cfg.p);
    let sigma = ar1_cov(p, AR1_RHO)?;
    let root = sqrt_psd(&sigma)?;
    let mut rng = child_rng(cfg.seed, rep as u64);

    let (x, y, true_basis) = match cfg.study {
        Study::One | Study::Two | Study::Three => {
            let x = normal_matrix(&mut rng, n, p) * root.as_matrix();
            let eps = normal_vector(&mut rng, n);
            let y = DVector::from_fn(n, |i, _| match cfg.study {
                Study::One => x[(i, 0)] + x[(i, 1)] + x[(i, 2)] + 0.5 * eps[i],
                Study::Two => x[(i, 0)] + x[(i, 1)] + x[(i, 2)] + 2.0 * eps[i],
                _ => x[(i, 0)] / (0.5 + (x[(i, 1)] + 1.5).powi(2)) + 0.2 * eps[i],
            });
            let mut basis = DMatrix::zeros(p, cfg.study.d());
            if cfg.study == Study::Three {
                basis[(0, 0)] = 1.0;
                basis[(1, 1)] = 1.0;
            } else {
                for i in 0..3 {
                    basis[(i, 0)] = 1.0;
                }
            }
            (x, y, basis)
        }
        Study::Four => {
            let y = normal_vector(&mut rng, n);
            let gamma = study4_gamma(p);
            let f = DMatrix::from_fn(n, 2, |i, j| if j == 0 { y[i] } else { y[i] * y[i] });
            let x = f * gamma.transpose() + normal_matrix(&mut rng, n, p) * root.as_matrix();
            let delta_inv = inv_sqrt(&sigma, DEFAULT_CLAMP)?;
            let basis = delta_inv.as_matrix() * delta_inv.as_matrix() * gamma;
            (x, y, basis)
        }
    };
    Ok(StudyData { data: Dataset::new(x, y)?, relevant: cfg.study.relevant(), true_basis })
}

/// Aggregated selection rates over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub reps_used: usize,
    /// `√(r3 (1 − r3) / reps)`
    pub se3: f64,
    /// Replications whose fit failed or did not converge.
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct ReplicationResult {
    pub rep: usize,
    pub outcome: SelectionOutcome,
    pub active: Vec<usize>,
    pub failed: bool,
    pub estimate: Option<SparseEstimate>,
}

/// Sums outcomes in the order given.
pub fn summarize(results: &[ReplicationResult]) -> SelectionReport {
    let reps = results.len();
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for r in results {
        s1 += r.outcome.relevant_hit_fraction;
        s2 += r.outcome.irrelevant_zero_fraction;
        s3 += if r.outcome.exact { 1.0 } else { 0.0 };
    }
    let k = reps.max(1) as f64;
    let r3 = s3 / k;
    SelectionReport {
        r1: s1 / k,
        r2: s2 / k,
        r3,
        reps_used: reps,
        se3: (r3 * (1.0 - r3) / k).sqrt(),
        failures: results.iter().filter(|r| r.failed).count(),
    }
}

/// Fits one dataset and scores it. Failed fits are scored with whatever
/// active set they realized (empty if none).
fn score(rep: usize, data: &Dataset, relevant: &[usize], fit: &FitConfig) -> Result<ReplicationResult> {
    let p = data.p();
    let (active, estimate) = match fit_dataset(data, fit) {
        Ok(out) => match out.estimate {
            Some(est) => (est.active.clone(), Some(est)),
            None => (out.trace.realized_active(), None),
        },
        Err(_) => (Vec::new(), None),
    };
    Ok(ReplicationResult {
        rep,
        outcome: selection_outcome(&active, relevant, p)?,
        active,
        failed: estimate.is_none(),
        estimate,
    })
}

pub fn run_replication(cfg: &StudyConfig, rep: usize) -> Result<ReplicationResult> {
    let sd = generate_study(cfg, rep)?;
    score(rep, &sd.data, &sd.relevant, &cfg.fit)
}

/// Runs all replications (in parallel) and returns them in replication order.
pub fn replicate(cfg: &StudyConfig) -> Result<Vec<ReplicationResult>> {
    cfg.validate()?;
    (0..cfg.reps).into_par_iter().map(|rep| run_replication(cfg, rep)).collect()
}

pub fn run_replications(cfg: &StudyConfig) -> Result<SelectionReport> {
    Ok(summarize(&replicate(cfg)?))
}

/// Unpenalized fit using only the given variables, embedded back into `p` rows.
pub fn oracle_basis(data: &Dataset, relevant: &[usize], fit: &FitConfig) -> Result<DMatrix<f64>> {
    let sub = data.select_columns(relevant)?;
    let kp = fit.method.build(&sub)?;
    let v = osdre(&kp, fit.d)?.basis.matrix().clone();
    Ok(embed_rows(&v, relevant, data.p()))
}

/// Distance between a replication's sparse fit and the oracle fit on the true variables.
pub fn oracle_distance(cfg: &StudyConfig, result: &ReplicationResult) -> Result<Option<f64>> {
    let Some(est) = &result.estimate else { return Ok(None) };
    let sd = generate_study(cfg, result.rep)?;
    let oracle = oracle_basis(&sd.data, &sd.relevant, &cfg.fit)?;
    subspace_distance(est.basis.matrix(), &oracle).map(Some)
}

/// One paired-bootstrap resample: rows for the response and the relevant
/// columns are drawn jointly, the remaining columns from an independent draw.
pub fn bootstrap_sample(data: &Dataset, relevant: &[usize], rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let (n, p) = (data.n(), data.p());
    let joint: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let other: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let mut is_relevant = vec![false; p];
    for &j in relevant {
        is_relevant[j] = true;
    }
    let x = DMatrix::from_fn(n, p, |i, j| {
        let row = if is_relevant[j] { joint[i] } else { other[i] };
        data.x()[(row, j)]
    });
    let y = DVector::from_fn(n, |i, _| data.y()[joint[i]]);
    Dataset::new(x, y)
}

/// Bootstrap screen that forces the non-relevant columns to be independent
/// of the response, then scores the selected sets.
pub fn bootstrap_screen(
    data: &Dataset,
    relevant: &[usize],
    fit: &FitConfig,
    reps: usize,
    seed: u64,
) -> Result<SelectionReport> {
    if relevant.is_empty() || relevant.iter().any(|&j| j >= data.p()) {
        return Err(CiseError::InvalidInput("relevant columns must be a nonempty subset of the predictors".into()));
    }
    if reps == 0 {
        return Err(CiseError::InvalidInput("reps must be at least 1".into()));
    }
    fit.validate()?;
    let results: Vec<ReplicationResult> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = child_rng(seed, rep as u64);
            match bootstrap_sample(data, relevant, &mut rng) {
                Ok(sample) => score(rep, &sample, relevant, fit),
                Err(_) => Ok(ReplicationResult {
                    rep,
                    outcome: selection_outcome(&[], relevant, data.p())?,
                    active: Vec::new(),
                    failed: true,
                    estimate: None,
                }),
            }
        })
        .collect::<Result<_>>()?;
    Ok(summarize(&results))
}
