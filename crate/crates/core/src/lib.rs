//! Coordinate-independent sparse sufficient dimension reduction.
//!
//! A sufficient dimension reduction method is expressed as a kernel pair
//! `(M, N)`; its unpenalized estimate of the central subspace is spanned by the
//! leading generalized eigenvectors of `M δ = λ N δ`. This crate adds a
//! row-group penalty to that problem so that entire predictors drop out of the
//! estimated basis, tunes the penalty with an information criterion, and ships
//! the simulation designs used to assess variable selection.
//!
//! ```
//! use cise_core::{fit_dataset, Dataset, FitConfig, Method};
//! use nalgebra::{DMatrix, DVector};
//!
//! let x = DMatrix::from_fn(50, 3, |i, j| ((i * 7 + j * 13) % 11) as f64);
//! let y = DVector::from_fn(50, |i, _| x[(i, 0)] + 0.1 * (i % 3) as f64);
//! let data = Dataset::new(x, y).unwrap();
//! let out = fit_dataset(&data, &FitConfig::new(Method::sir(), 1)).unwrap();
//! assert!(out.estimate.is_some());
//! ```

pub mod error;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod simlab;
pub mod solver;

pub use error::{CiseError, Result};
pub use kernels::{Dataset, FBasis, KernelMeta, KernelPair, Method, MethodTag, SliceAssignment};
pub use linalg::{EigenDecomp, SymMatrix};
pub use metrics::{selection_outcome, subspace_distance, SelectionOutcome};
pub use pipeline::{fit_dataset, FitConfig, FitOutput};
pub use simlab::{SelectionReport, Study, StudyConfig};
pub use solver::{
    adaptive_weights, cise_fit, osdre, penalty_rho, tune, Basis, CiseOptions, CiseProblem, GridSpec,
    OsdreFit, PenaltyWeights, Rule, SparseEstimate, TuningTrace,
};
