//! `maxstable` command line driver.
//!
//! Exit codes: 0 on success, 1 when a verification suite has failures, 2 on
//! usage or configuration errors and 3 on numerical degeneracy.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxstable_core::asymptotics::{
    build_report, empirical_bias, extremal_coefficient_layers, second_order_gap, default_gap_grid,
    theoretical_bias_variance, Estimator, GapConvention,
};
use maxstable_core::design::{pair_weights, sample_stations, StationLayout};
use maxstable_core::estimate::{fit_dependence, FitOptions};
use maxstable_core::likelihood::CensoredConfig;
use maxstable_core::simulate::{simulate_daily_panel_with, ThresholdSpec};
use maxstable_core::SmithParams;
use serde::Serialize;

pub mod config;
pub mod error;
pub mod exec;
pub mod files;
pub mod verify;

use config::{load_section, ResolvedStudy, StudySection};
use error::{CliError, CliResult};
use exec::PoolExecutor;
use files::ModelRun;

#[derive(Debug, Parser)]
#[command(name = "maxstable", version, about = "Censored pairwise likelihood for the Smith max-stable model")]
pub struct Cli {
    /// Worker threads; defaults to all cores. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate stations and a daily Smith panel.
    Simulate(SimulateArgs),
    /// Fit the Smith covariance to a panel.
    Fit(FitArgs),
    /// Bias curves, MSE curves and extremal coefficient layers.
    Study(StudyArgs),
    /// Theoretical MSE curves and their minimising thresholds.
    MseSweep(StudyArgs),
    /// Extremal coefficient layers from theory and replicated fits.
    Extcoef(StudyArgs),
    /// Run a self-check suite and write its table.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Smith,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "smith")]
    pub model: ModelName,
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 3.0)]
    pub gamma: f64,
    /// Number of stations.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub days: usize,
    /// Days per year.
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(clap::ArgGroup::new("threshold").required(true).args(["threshold_quantile", "exceedances"])))]
pub struct FitArgs {
    #[arg(long)]
    pub panel: PathBuf,
    #[arg(long)]
    pub stations: PathBuf,
    #[arg(long)]
    pub threshold_quantile: Option<f64>,
    /// Pooled exceedance count `N`.
    #[arg(long)]
    pub exceedances: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for restart jitter.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_evals: Option<usize>,
    #[arg(long)]
    pub restarts: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    /// TOML file with a `[study]` table and optional per-command tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated models among i, ii, custom.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    #[arg(long)]
    pub mc_panels: Option<usize>,
    /// Comma-separated exceedance counts.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum SuiteName {
    Margins,
    Maxstable,
    AppendixA,
    AppendixB,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, value_enum)]
    pub suite: SuiteName,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    let exec = PoolExecutor::new(cli.threads)?;
    match &cli.command {
        Command::Simulate(a) => simulate(a, &exec),
        Command::Fit(a) => fit(a),
        Command::Study(a) => study(a, "study", &exec),
        Command::MseSweep(a) => study(a, "mse-sweep", &exec),
        Command::Extcoef(a) => study(a, "extcoef", &exec),
        Command::Verify(a) => run_verify(a),
    }
}

fn simulate(a: &SimulateArgs, exec: &PoolExecutor) -> CliResult<()> {
    let p = SmithParams::new(a.alpha, a.beta, a.gamma)?;
    let layout = sample_stations(a.n, a.seed)?;
    let panel = simulate_daily_panel_with(exec, &layout, &p, a.days, a.m, a.seed)?;
    files::write_stations(&a.out.join("stations.csv"), &layout)?;
    files::write_panel(&a.out.join("panel.csv"), &panel)?;
    files::write_manifest(&a.out.join("manifest.txt"), "simulate", a)
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "fit".into());
    out.with_file_name(format!("{stem}.manifest.txt"))
}

fn fit(a: &FitArgs) -> CliResult<()> {
    let panel = files::read_panel(&a.panel)?;
    let sites = files::read_stations(&a.stations)?;
    if sites.len() != panel.n_stations() {
        return Err(CliError::Config(format!(
            "{} has {} stations but the panel has {}",
            a.stations.display(),
            sites.len(),
            panel.n_stations()
        )));
    }
    let n = sites.len();
    let layout = StationLayout::from_sites(sites, (n as f64).sqrt(), 0)?;
    let weights = pair_weights(&layout);
    let threshold = match (a.threshold_quantile, a.exceedances) {
        (Some(q), None) => ThresholdSpec::Quantile(q),
        (None, Some(k)) => ThresholdSpec::ExceedanceCount(k),
        _ => return Err(CliError::Config("give exactly one of --threshold-quantile and --exceedances".into())),
    };
    threshold.validate()?;
    let defaults = FitOptions::default();
    let opts = FitOptions {
        seed: a.seed,
        max_evals: a.max_evals.unwrap_or(defaults.max_evals),
        restarts: a.restarts.unwrap_or(defaults.restarts),
        ..defaults
    };
    let result = fit_dependence(&panel, &CensoredConfig::new(threshold, &weights), &opts)?;
    files::write_table(&a.out, &files::FIT_HEADER, [files::fit_row(&result)])?;
    files::write_manifest(&sibling_manifest(&a.out), "fit", a)
}

fn resolve_study(a: &StudyArgs, command: &str) -> CliResult<ResolvedStudy> {
    let base = match &a.config {
        Some(path) => load_section(path, command)?,
        None => StudySection::default(),
    };
    let flags = StudySection {
        models: a.models.clone(),
        seed: a.seed,
        replications: a.replications,
        mc_panels: a.mc_panels,
        n_grid: a.n_grid.clone(),
        n: a.n,
        days: a.days,
        m: a.m,
        ..Default::default()
    };
    ResolvedStudy::from_section(&base.overlay(&flags))
}

fn study(a: &StudyArgs, command: &str, exec: &PoolExecutor) -> CliResult<()> {
    let resolved = resolve_study(a, command)?;
    let needs_fits = command != "mse-sweep";
    let mut configs = Vec::new();
    let mut outputs = Vec::new();
    for (name, theta0) in &resolved.models {
        let cfg = resolved.study_config(theta0)?;
        let theo = theoretical_bias_variance(&cfg, exec)?;
        let emp = if needs_fits { Some(empirical_bias(&cfg, &Estimator::Fit(cfg.fit), exec)?) } else { None };
        let report = build_report(&theo, emp.as_ref().map(|e| e.points.as_slice()));
        let layers = emp.as_ref().map(|e| extremal_coefficient_layers(&cfg, &theo, &e.points));
        configs.push((name.clone(), cfg));
        outputs.push((report, emp, layers));
    }
    let runs: Vec<ModelRun<'_>> = configs
        .iter()
        .zip(&outputs)
        .map(|((name, cfg), (report, emp, layers))| ModelRun {
            name,
            study: cfg,
            report,
            empirical: emp.as_ref(),
            layers: layers.as_deref(),
        })
        .collect();
    let out = &a.out;
    match command {
        "study" => {
            files::write_bias_curves(&out.join("bias_curves.csv"), &runs)?;
            files::write_mse_curves(&out.join("mse_curves.csv"), &runs)?;
            files::write_extcoef_layers(&out.join("extcoef_layers.csv"), &runs)?;
            files::write_replicates(&out.join("replicates.csv"), &runs)?;
        }
        "mse-sweep" => {
            files::write_mse_curves(&out.join("mse_curves.csv"), &runs)?;
            files::write_mse_argmin(&out.join("mse_argmin.csv"), &runs)?;
        }
        _ => files::write_extcoef_layers(&out.join("extcoef_layers.csv"), &runs)?,
    }
    files::write_manifest(&out.join("manifest.txt"), command, &resolved.to_section())
}

fn run_verify(a: &VerifyArgs) -> CliResult<()> {
    let suite = match a.suite {
        SuiteName::Margins => verify::Suite::Margins,
        SuiteName::Maxstable => verify::Suite::Maxstable,
        SuiteName::AppendixA => verify::Suite::AppendixA,
        SuiteName::AppendixB => verify::Suite::AppendixB,
    };
    let checks = verify::run_suite(suite)?;
    verify::write_checks(&a.out.join(format!("verify_{}.csv", suite.name())), &checks)?;
    if suite == verify::Suite::AppendixA {
        let grid = default_gap_grid();
        let mut evals = Vec::new();
        for convention in GapConvention::ALL {
            for rho in [0.0, 0.5] {
                for t in [1e4, 1e8, 1e16] {
                    evals.push(second_order_gap(rho, t, &grid, convention)?);
                }
            }
        }
        files::write_second_order(&a.out.join("second_order.csv"), &evals)?;
    }
    files::write_manifest(&a.out.join("manifest.txt"), "verify", a)?;
    let failed = checks.iter().filter(|c| !c.pass()).count();
    for c in &checks {
        println!("{} {}", if c.pass() { "pass" } else { "FAIL" }, c.name);
    }
    if failed > 0 {
        return Err(CliError::VerificationFailed { failed, total: checks.len() });
    }
    Ok(())
}
