//! Command implementations. Each returns the finished JSON text.

use std::path::PathBuf;

use cise_core::simlab::{bootstrap_screen, run_replications, STUDY_P};
use cise_core::solver::GridPoint;
use cise_core::{fit_dataset, CiseError, FitConfig, FitOutput, GridSpec, MethodTag, SelectionReport, Study, StudyConfig};
use serde::Serialize;

use crate::args::{BootArgs, Command, DataArgs, ModelArgs, SimArgs};
use crate::data::{load_csv, NamedDataset};
use crate::error::{CliError, CliResult};
use crate::report::{to_json, SCHEMA_VERSION};

/// Fully resolved run configuration, echoed into every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub input: Option<String>,
    pub response: Option<String>,
    pub fit: FitConfig,
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub study: Option<u8>,
    pub n: Option<usize>,
    pub relevant: Option<Vec<String>>,
}

#[derive(Debug, Serialize)]
pub struct DataSummary {
    pub n: usize,
    pub p: usize,
    pub response: String,
    pub predictors: Vec<String>,
}

impl DataSummary {
    fn of(ds: &NamedDataset) -> Self {
        DataSummary { n: ds.data.n(), p: ds.data.p(), response: ds.response.clone(), predictors: ds.names.clone() }
    }
}

#[derive(Debug, Serialize)]
pub struct GridRow {
    pub theta: f64,
    pub criterion: Option<f64>,
    pub p_active: Option<usize>,
    pub active: Vec<String>,
    pub converged: bool,
    pub iterations: usize,
    pub error: Option<String>,
}

fn grid_rows(grid: &[GridPoint], names: &[String]) -> Vec<GridRow> {
    grid.iter()
        .map(|gp| GridRow {
            theta: gp.theta,
            criterion: gp.criterion,
            p_active: gp.p_active,
            active: gp.active.iter().map(|&i| names[i].clone()).collect(),
            converged: gp.converged,
            iterations: gp.iterations,
            error: gp.error.clone(),
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct FitResult {
    pub method: MethodTag,
    pub d: usize,
    pub selected_theta: f64,
    pub criterion: Option<f64>,
    pub active: Vec<String>,
    /// `p x d`, one row per predictor in file order; inactive rows are zero.
    pub basis: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub eigen_gap: Option<f64>,
    pub degenerate: bool,
    pub converged: bool,
    pub iterations: usize,
    pub objective: f64,
    pub tuning: Vec<GridRow>,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema: u32,
    pub config: RunConfig,
    pub data: DataSummary,
    pub result: FitResult,
}

#[derive(Debug, Serialize)]
pub struct TuneReport {
    pub schema: u32,
    pub config: RunConfig,
    pub data: DataSummary,
    pub gamma: f64,
    pub selected: Option<usize>,
    pub selected_theta: Option<f64>,
    pub grid: Vec<GridRow>,
}

#[derive(Debug, Serialize)]
pub struct StudyMeta {
    pub study: u8,
    pub p: usize,
    pub d: usize,
    pub relevant: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct SimReport {
    pub schema: u32,
    pub config: RunConfig,
    pub study: StudyMeta,
    pub report: SelectionReport,
}

#[derive(Debug, Serialize)]
pub struct BootReport {
    pub schema: u32,
    pub config: RunConfig,
    pub data: DataSummary,
    /// `flag` when given on the command line, `fit` when taken from a fit on the original data.
    pub relevant_source: &'static str,
    pub report: SelectionReport,
}

fn fit_config(model: &ModelArgs, d: usize) -> CliResult<FitConfig> {
    let mut cfg = FitConfig::new(model.method(), d);
    cfg.rule = model.rule.into();
    cfg.grid = model.theta_grid.clone().unwrap_or(GridSpec::Default);
    cfg.r = model.r;
    cfg.options.eps = model.eps;
    cfg.standardize = model.standardize;
    if matches!(model.method().tag(), MethodTag::Sir | MethodTag::Save | MethodTag::Dr) && model.slices < 2 {
        return Err(CliError::Usage(format!("--slices must be at least 2, got {}", model.slices)));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required_d(model: &ModelArgs) -> CliResult<usize> {
    model.d.ok_or_else(|| CliError::Usage("--d is required".into()))
}

fn data_config(command: &'static str, args: &DataArgs, fit: FitConfig) -> RunConfig {
    RunConfig {
        command,
        input: Some(args.input.display().to_string()),
        response: Some(args.response.clone()),
        fit,
        seed: None,
        reps: None,
        study: None,
        n: None,
        relevant: None,
    }
}

fn fit_result(out: &FitOutput, ds: &NamedDataset, d: usize) -> CliResult<FitResult> {
    let est = out.estimate.as_ref().ok_or(CliError::Core(CiseError::AllFitsFailed))?;
    let gp = out.trace.selected_point().ok_or(CliError::Core(CiseError::AllFitsFailed))?;
    let v = est.basis.matrix();
    Ok(FitResult {
        method: out.kernel.method,
        d,
        selected_theta: gp.theta,
        criterion: gp.criterion,
        active: ds.names_of(&est.active),
        basis: (0..v.nrows()).map(|i| v.row(i).iter().copied().collect()).collect(),
        eigenvalues: est.eigenvalues.clone(),
        eigen_gap: est.eigen_gap,
        degenerate: est.degenerate,
        converged: est.converged,
        iterations: est.iterations,
        objective: est.objective,
        tuning: grid_rows(&out.trace.grid, &ds.names),
    })
}

pub fn cmd_fit(args: &DataArgs) -> CliResult<String> {
    let d = required_d(&args.model)?;
    let fit = fit_config(&args.model, d)?;
    let ds = load_csv(&args.input, &args.response)?;
    let out = fit_dataset(&ds.data, &fit)?;
    let result = fit_result(&out, &ds, d)?;
    to_json(&FitReport {
        schema: SCHEMA_VERSION,
        config: data_config("fit", args, fit),
        data: DataSummary::of(&ds),
        result,
    })
}

pub fn cmd_tune(args: &DataArgs) -> CliResult<String> {
    let d = required_d(&args.model)?;
    let fit = fit_config(&args.model, d)?;
    let ds = load_csv(&args.input, &args.response)?;
    let out = fit_dataset(&ds.data, &fit)?;
    if out.trace.selected.is_none() {
        return Err(CiseError::AllFitsFailed.into());
    }
    to_json(&TuneReport {
        schema: SCHEMA_VERSION,
        gamma: fit.rule.gamma(ds.data.n()),
        selected: out.trace.selected,
        selected_theta: out.selected_theta(),
        grid: grid_rows(&out.trace.grid, &ds.names),
        config: data_config("tune", args, fit),
        data: DataSummary::of(&ds),
    })
}

pub fn cmd_simulate(args: &SimArgs) -> CliResult<String> {
    let study = Study::try_from(args.study)?;
    let d = args.model.d.unwrap_or(study.d());
    let fit = fit_config(&args.model, d)?;
    let cfg = StudyConfig { study, n: args.n, p: STUDY_P, reps: args.reps, seed: args.seed, fit: fit.clone() };
    let report = run_replications(&cfg)?;
    let relevant = study.relevant().iter().map(|i| format!("x{}", i + 1)).collect();
    to_json(&SimReport {
        schema: SCHEMA_VERSION,
        config: RunConfig {
            command: "simulate",
            input: None,
            response: None,
            fit,
            seed: Some(args.seed),
            reps: Some(args.reps),
            study: Some(args.study),
            n: Some(args.n),
            relevant: None,
        },
        study: StudyMeta { study: args.study, p: STUDY_P, d: study.d(), relevant },
        report,
    })
}

pub fn cmd_bootstrap(args: &BootArgs) -> CliResult<String> {
    let d = required_d(&args.data.model)?;
    let fit = fit_config(&args.data.model, d)?;
    let ds = load_csv(&args.data.input, &args.data.response)?;
    let (relevant, source) = match &args.relevant {
        Some(names) => (ds.indices_of(names)?, "flag"),
        None => {
            let out = fit_dataset(&ds.data, &fit)?;
            let est = out.estimate.ok_or(CliError::Core(CiseError::AllFitsFailed))?;
            (est.active, "fit")
        }
    };
    let report = bootstrap_screen(&ds.data, &relevant, &fit, args.reps, args.seed)?;
    let mut config = data_config("bootstrap", &args.data, fit);
    config.seed = Some(args.seed);
    config.reps = Some(args.reps);
    config.relevant = Some(ds.names_of(&relevant));
    to_json(&BootReport { schema: SCHEMA_VERSION, config, data: DataSummary::of(&ds), relevant_source: source, report })
}

/// Runs a parsed command, returning the report text and where it should go.
pub fn execute(cmd: &Command) -> CliResult<(String, Option<PathBuf>)> {
    let (text, out) = match cmd {
        Command::Fit(a) => (cmd_fit(a)?, a.model.output.clone()),
        Command::Tune(a) => (cmd_tune(a)?, a.model.output.clone()),
        Command::Simulate(a) => (cmd_simulate(a)?, a.model.output.clone()),
        Command::Bootstrap(a) => (cmd_bootstrap(a)?, a.data.model.output.clone()),
    };
    Ok((text, out))
}
