//! On-disk formats: station and panel CSVs, the panel `.meta` sidecar,
//! result tables and run manifests.
//!
//! Floats are written in shortest round-trip form; a missing value is an
//! empty field.

use std::fs;
use std::path::{Path, PathBuf};

use maxstable_core::asymptotics::{
    EmpiricalStudy, LayerRow, SecondOrderEval, StudyConfig, StudyReport, PARAM_NAMES,
};
use maxstable_core::design::StationLayout;
use maxstable_core::estimate::FitResult;
use maxstable_core::simulate::{DailyPanel, PanelSource};
use maxstable_core::SmithParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    csv::Writer::from_path(path).map_err(CliError::csv(path))
}

/// Writes a header and rows of pre-formatted fields.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(CliError::csv(path))?;
    for r in rows {
        w.write_record(&r).map_err(CliError::csv(path))?;
    }
    w.flush().map_err(CliError::io(path))
}

fn read_rows(path: &Path) -> CliResult<(csv::StringRecord, Vec<csv::StringRecord>)> {
    let mut r = csv::Reader::from_path(path).map_err(CliError::csv(path))?;
    let header = r.headers().map_err(CliError::csv(path))?.clone();
    let rows = r.records().collect::<Result<Vec<_>, _>>().map_err(CliError::csv(path))?;
    Ok((header, rows))
}

fn parse_f64(path: &Path, field: &str) -> CliResult<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{}: `{field}` is not a number", path.display())))
}

pub fn write_stations(path: &Path, layout: &StationLayout) -> CliResult<()> {
    let rows = layout
        .sites
        .iter()
        .enumerate()
        .map(|(i, s)| vec![(i + 1).to_string(), fmt_f64(s[0]), fmt_f64(s[1])]);
    write_table(path, &["id", "x", "y"], rows)
}

pub fn read_stations(path: &Path) -> CliResult<Vec<[f64; 2]>> {
    let (header, rows) = read_rows(path)?;
    if header.len() != 3 {
        return Err(CliError::Config(format!("{}: expected columns id,x,y", path.display())));
    }
    rows.iter().map(|r| Ok([parse_f64(path, &r[1])?, parse_f64(path, &r[2])?])).collect()
}

/// Sidecar describing a panel file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelMeta {
    pub days: usize,
    pub n_stations: usize,
    pub days_per_year: usize,
    pub model: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: u64,
}

pub fn meta_path(panel: &Path) -> PathBuf {
    let mut s = panel.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_panel(path: &Path, panel: &DailyPanel) -> CliResult<()> {
    let n = panel.n_stations();
    let mut header = vec!["day".to_string()];
    header.extend((1..=n).map(|i| format!("station_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..panel.days()).map(|d| {
        let mut r = vec![(d + 1).to_string()];
        r.extend(panel.row(d).iter().map(|&v| fmt_f64(v)));
        r
    });
    write_table(path, &header, rows)?;
    let (model, p) = match panel.source {
        PanelSource::Smith(p) => ("smith".to_string(), Some(p)),
        PanelSource::External => ("external".to_string(), None),
    };
    let meta = PanelMeta {
        days: panel.days(),
        n_stations: n,
        days_per_year: panel.days_per_year(),
        model,
        alpha: p.map(|p| p.alpha),
        beta: p.map(|p| p.beta),
        gamma: p.map(|p| p.gamma),
        seed: panel.seed,
    };
    let text = toml::to_string(&meta).map_err(|e| CliError::Config(e.to_string()))?;
    let mp = meta_path(path);
    fs::write(&mp, text).map_err(CliError::io(mp))
}

/// Reads a panel; without a sidecar the whole record is taken as one year.
pub fn read_panel(path: &Path) -> CliResult<DailyPanel> {
    let (header, rows) = read_rows(path)?;
    let n = header.len().saturating_sub(1);
    if n < 2 {
        return Err(CliError::Config(format!("{}: need a day column and at least two stations", path.display())));
    }
    let mut data = Vec::with_capacity(rows.len() * n);
    for r in &rows {
        if r.len() != n + 1 {
            return Err(CliError::Config(format!("{}: ragged row {:?}", path.display(), r)));
        }
        for f in r.iter().skip(1) {
            data.push(parse_f64(path, f)?);
        }
    }
    let mp = meta_path(path);
    let (m, source, seed) = match fs::read_to_string(&mp) {
        Ok(text) => {
            let meta: PanelMeta = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", mp.display())))?;
            if meta.days != rows.len() || meta.n_stations != n {
                return Err(CliError::Config(format!("{}: shape disagrees with {}", mp.display(), path.display())));
            }
            let source = match (meta.model.as_str(), meta.alpha, meta.beta, meta.gamma) {
                ("smith", Some(a), Some(b), Some(g)) => PanelSource::Smith(SmithParams::new(a, b, g)?),
                _ => PanelSource::External,
            };
            (meta.days_per_year, source, meta.seed)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => (rows.len(), PanelSource::External, 0),
        Err(e) => return Err(CliError::io(mp)(e)),
    };
    Ok(DailyPanel::from_rows(data, rows.len(), n, m, source, seed)?)
}

pub const FIT_HEADER: [&str; 13] = [
    "alpha",
    "beta",
    "gamma",
    "loglik",
    "loglik_init",
    "converged",
    "evals",
    "threshold",
    "n_exceed",
    "case1",
    "case2",
    "case3",
    "case4",
];

pub fn fit_row(f: &FitResult) -> Vec<String> {
    let mut r = vec![
        fmt_f64(f.theta_hat.alpha),
        fmt_f64(f.theta_hat.beta),
        fmt_f64(f.theta_hat.gamma),
        fmt_f64(f.loglik_at_opt),
        fmt_f64(f.loglik_at_init),
        f.converged.to_string(),
        f.evals.to_string(),
        fmt_f64(f.threshold),
        f.n_exceed.to_string(),
    ];
    r.extend(f.case_counts.iter().map(u64::to_string));
    r
}

/// One model's results in a study run.
pub struct ModelRun<'a> {
    pub name: &'a str,
    pub study: &'a StudyConfig,
    pub report: &'a StudyReport,
    pub empirical: Option<&'a EmpiricalStudy>,
    pub layers: Option<&'a [LayerRow]>,
}

pub fn write_bias_curves(path: &Path, runs: &[ModelRun<'_>]) -> CliResult<()> {
    let mut rows = Vec::new();
    for run in runs {
        for r in &run.report.rows {
            rows.push(vec![
                run.name.to_string(),
                PARAM_NAMES[r.param].to_string(),
                r.n_exceed.to_string(),
                fmt_f64(r.threshold),
                fmt_opt(r.empirical_bias),
                fmt_opt(r.ci_lo),
                fmt_opt(r.ci_hi),
                fmt_opt(r.theoretical_bias),
            ]);
        }
    }
    write_table(path, &["model", "param", "N", "u", "empirical_bias", "ci_lo", "ci_hi", "theoretical_bias"], rows)
}

pub fn write_mse_curves(path: &Path, runs: &[ModelRun<'_>]) -> CliResult<()> {
    let mut rows = Vec::new();
    for run in runs {
        for r in &run.report.rows {
            rows.push(vec![
                run.name.to_string(),
                PARAM_NAMES[r.param].to_string(),
                r.n_exceed.to_string(),
                fmt_opt(r.theoretical_bias.map(|b| b * b)),
                fmt_opt(r.variance),
                fmt_opt(r.mse),
            ]);
        }
    }
    write_table(path, &["model", "param", "N", "bias2", "variance", "mse"], rows)
}

pub fn write_mse_argmin(path: &Path, runs: &[ModelRun<'_>]) -> CliResult<()> {
    let mut rows = Vec::new();
    for run in runs {
        let named = PARAM_NAMES.iter().zip(run.report.argmin).chain([(&"pooled", run.report.pooled_argmin)]);
        for (name, n) in named {
            rows.push(vec![
                run.name.to_string(),
                name.to_string(),
                n.map(|n| n.to_string()).unwrap_or_default(),
                fmt_opt(n.map(|n| run.study.implied_quantile(n))),
            ]);
        }
    }
    write_table(path, &["model", "param", "N", "quantile"], rows)
}

pub fn write_extcoef_layers(path: &Path, runs: &[ModelRun<'_>]) -> CliResult<()> {
    let mut rows = Vec::new();
    for run in runs {
        for l in run.layers.unwrap_or_default() {
            rows.push(vec![
                run.name.to_string(),
                l.n_exceed.to_string(),
                fmt_f64(l.h),
                fmt_f64(l.theta_true),
                fmt_opt(l.theta_theoretical),
                fmt_opt(l.theta_fitted),
            ]);
        }
    }
    write_table(path, &["model", "N", "h", "theta_true", "theta_theoretical", "theta_fitted"], rows)
}

pub fn write_replicates(path: &Path, runs: &[ModelRun<'_>]) -> CliResult<()> {
    let mut rows = Vec::new();
    for run in runs {
        let Some(emp) = run.empirical else { continue };
        for (r, fits) in emp.fits.iter().enumerate() {
            for (k, f) in fits.iter().enumerate() {
                rows.push(vec![
                    run.name.to_string(),
                    (r + 1).to_string(),
                    run.study.n_grid[k].to_string(),
                    fmt_f64(f.threshold),
                    fmt_f64(f.theta[0]),
                    fmt_f64(f.theta[1]),
                    fmt_f64(f.theta[2]),
                    f.converged.to_string(),
                ]);
            }
        }
    }
    write_table(path, &["model", "replication", "N", "u", "alpha", "beta", "gamma", "converged"], rows)
}

pub fn write_second_order(path: &Path, evals: &[SecondOrderEval]) -> CliResult<()> {
    let mut rows = Vec::new();
    for e in evals {
        for p in &e.points {
            rows.push(vec![
                e.convention.name().to_string(),
                fmt_f64(e.rho),
                fmt_f64(e.t),
                fmt_f64(p.x),
                fmt_f64(p.y),
                fmt_f64(p.gap_over_a),
                fmt_f64(p.psi),
            ]);
        }
    }
    write_table(path, &["convention", "rho", "t", "x", "y", "gap_over_A", "psi"], rows)
}

/// `manifest.txt`: the command, library version and the resolved settings
/// as a `[command]` table.
pub fn write_manifest<T: Serialize>(path: &Path, command: &str, resolved: &T) -> CliResult<()> {
    let mut table = toml::Table::new();
    table.insert("command".into(), command.into());
    table.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    let body = toml::Value::try_from(resolved).map_err(|e| CliError::Config(e.to_string()))?;
    table.insert(command.into(), body);
    let text = toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, text).map_err(CliError::io(path))
}
