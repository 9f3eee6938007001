//! Data → kernel → tuned sparse fit, as used by the simulations and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{CiseError, Result};
use crate::kernels::{Dataset, KernelPair, Method};
use crate::solver::{tune_trace, CiseOptions, CiseProblem, GridSpec, Rule, SparseEstimate, TuningTrace};

pub const DEFAULT_R: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: Method,
    pub d: usize,
    pub rule: Rule,
    pub grid: GridSpec,
    /// Exponent of the adaptive weights.
    pub r: f64,
    pub options: CiseOptions,
    /// Rescale predictors to unit variance before building the kernel.
    pub standardize: bool,
}

impl FitConfig {
    pub fn new(method: Method, d: usize) -> Self {
        FitConfig {
            method,
            d,
            rule: Rule::Bic,
            grid: GridSpec::Default,
            r: DEFAULT_R,
            options: CiseOptions::default(),
            standardize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(CiseError::InvalidInput("dimension d must be at least 1".into()));
        }
        if let Some(rank) = self.method.max_rank() {
            if rank < self.d {
                return Err(CiseError::InvalidInput(format!(
                    "method {:?} yields a kernel of rank at most {rank}, below d = {}",
                    self.method, self.d
                )));
            }
        }
        if !(self.r > 0.0) {
            return Err(CiseError::InvalidInput(format!("exponent r must be positive, got {}", self.r)));
        }
        if !(self.options.eps > 0.0) || !(self.options.tol > 0.0) || self.options.max_iter == 0 {
            return Err(CiseError::InvalidInput("solver options must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub kernel: KernelPair,
    pub trace: TuningTrace,
    /// `None` when no grid point produced a converged fit.
    pub estimate: Option<SparseEstimate>,
}

impl FitOutput {
    pub fn selected_theta(&self) -> Option<f64> {
        self.trace.selected_point().map(|gp| gp.theta)
    }
}

/// Builds the kernel for `data` and tunes the sparse fit over the grid.
pub fn fit_dataset(data: &Dataset, cfg: &FitConfig) -> Result<FitOutput> {
    cfg.validate()?;
    let scaled;
    let data = if cfg.standardize {
        scaled = data.standardized()?;
        &scaled
    } else {
        data
    };
    let kernel = cfg.method.build(data)?;
    let problem = CiseProblem::new(&kernel)?;
    let grid = cfg.grid.resolve(&problem)?;
    let (trace, estimate) = tune_trace(&problem, cfg.d, &grid, cfg.rule, cfg.r, data.n(), &cfg.options)?;
    Ok(FitOutput { kernel, trace, estimate })
}
