//! Command-line grammar.

use std::path::PathBuf;

use cise_core::kernels::DEFAULT_SLICES;
use cise_core::pipeline::DEFAULT_R;
use cise_core::{CiseOptions, FBasis, GridSpec, Method, Rule};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cise", version, about = "Sparse sufficient dimension reduction with group-penalized eigenproblems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a tuned sparse basis to a CSV dataset.
    Fit(DataArgs),
    /// Report the tuning criterion over the penalty grid.
    Tune(DataArgs),
    /// Run one of the simulation studies.
    Simulate(SimArgs),
    /// Bootstrap selection screen on a CSV dataset.
    Bootstrap(BootArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pca,
    Pfc,
    Sir,
    Save,
    Dr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FBasisArg {
    AbsLinQuad,
    SqrtLinQuad,
}

impl From<FBasisArg> for FBasis {
    fn from(f: FBasisArg) -> FBasis {
        match f {
            FBasisArg::AbsLinQuad => FBasis::AbsLinQuad,
            FBasisArg::SqrtLinQuad => FBasis::SqrtLinQuad,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Aic,
    Bic,
}

impl From<RuleArg> for Rule {
    fn from(r: RuleArg) -> Rule {
        match r {
            RuleArg::Aic => Rule::Aic,
            RuleArg::Bic => Rule::Bic,
        }
    }
}

/// Parses `lo:hi:count` into a log-spaced grid.
pub fn parse_theta_grid(s: &str) -> Result<GridSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(format!("expected lo:hi:count, got `{s}`"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound `{lo}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound `{hi}`"))?;
    let count: usize = count.trim().parse().map_err(|_| format!("bad count `{count}`"))?;
    Ok(GridSpec::Log { lo, hi, count })
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value = "pfc")]
    pub method: MethodArg,
    /// Structural dimension (simulate defaults to the study's own).
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of slices for SIR, SAVE and DR.
    #[arg(long, default_value_t = DEFAULT_SLICES)]
    pub slices: usize,
    /// Response basis for PFC.
    #[arg(long, value_enum, default_value = "abs-lin-quad")]
    pub fbasis: FBasisArg,
    #[arg(long, value_enum, default_value = "bic")]
    pub rule: RuleArg,
    /// Log-spaced penalty grid `lo:hi:count`; defaults to a grid scaled by the kernel.
    #[arg(long = "theta-grid", value_parser = parse_theta_grid)]
    pub theta_grid: Option<GridSpec>,
    /// Exponent of the adaptive weights.
    #[arg(long, default_value_t = DEFAULT_R)]
    pub r: f64,
    /// Row norm below which a variable is removed.
    #[arg(long, default_value_t = CiseOptions::default().eps)]
    pub eps: f64,
    /// Rescale predictors to unit variance first.
    #[arg(long)]
    pub standardize: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl ModelArgs {
    pub fn method(&self) -> Method {
        let h = self.slices;
        match self.method {
            MethodArg::Pca => Method::Pca,
            MethodArg::Pfc => Method::Pfc { basis: self.fbasis.into(), isotropic: false },
            MethodArg::Sir => Method::Sir { slices: h },
            MethodArg::Save => Method::Save { slices: h },
            MethodArg::Dr => Method::Dr { slices: h },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
    pub study: u8,
    #[arg(long, default_value_t = 120)]
    pub n: usize,
    #[arg(long, default_value_t = cise_core::simlab::DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BootArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = cise_core::simlab::DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated predictor names kept jointly with the response.
    /// Defaults to the active set of a fit on the original data.
    #[arg(long, value_delimiter = ',')]
    pub relevant: Option<Vec<String>>,
}
