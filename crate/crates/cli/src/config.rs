//! Study configuration files.
//!
//! A config is TOML restricted to flat `key = value` tables. Top-level keys
//! `command` and `version` are accepted (and ignored) so that a run's
//! `manifest.txt` can be fed back as a config. Each study-type subcommand
//! reads the `[study]` table and then its own table on top, and command-line
//! flags override both.

use std::path::Path;

use maxstable_core::design::sample_stations;
use maxstable_core::estimate::FitOptions;
use maxstable_core::asymptotics::StudyConfig;
use maxstable_core::SmithParams;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Any of `i`, `ii` and `custom`; `custom` reads `alpha`, `beta`, `gamma`.
    pub models: Option<Vec<String>>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub n: Option<usize>,
    pub days: Option<usize>,
    pub m: Option<usize>,
    pub replications: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub mc_panels: Option<usize>,
    pub seed: Option<u64>,
    pub max_evals: Option<usize>,
    pub restarts: Option<usize>,
    pub jitter: Option<f64>,
    pub tol_f: Option<f64>,
    pub tol_x: Option<f64>,
    pub interpolate: Option<bool>,
}

macro_rules! overlay_fields {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl StudySection {
    /// Values present in `top` replace those in `self`.
    pub fn overlay(mut self, top: &StudySection) -> Self {
        overlay_fields!(
            self, top, models, alpha, beta, gamma, n, days, m, replications, n_grid, mc_panels, seed, max_evals, restarts,
            jitter, tol_f, tol_x, interpolate
        );
        self
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[allow(dead_code)]
    command: Option<String>,
    #[allow(dead_code)]
    version: Option<String>,
    study: Option<StudySection>,
    #[serde(rename = "mse-sweep")]
    mse_sweep: Option<StudySection>,
    extcoef: Option<StudySection>,
}

/// Reads `path` and merges `[study]` with the table named `command`.
pub fn load_section(path: &Path, command: &str) -> CliResult<StudySection> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    parse_section(&text, command)
}

pub fn parse_section(text: &str, command: &str) -> CliResult<StudySection> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let base = file.study.unwrap_or_default();
    let own = match command {
        "mse-sweep" => file.mse_sweep,
        "extcoef" => file.extcoef,
        _ => None,
    };
    Ok(match own {
        Some(top) => base.overlay(&top),
        None => base,
    })
}

/// A study section with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedStudy {
    pub models: Vec<(String, SmithParams)>,
    pub n: usize,
    pub days: usize,
    pub m: usize,
    pub replications: usize,
    pub n_grid: Vec<usize>,
    pub mc_panels: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

impl ResolvedStudy {
    pub fn from_section(s: &StudySection) -> CliResult<Self> {
        let names = s.models.clone().unwrap_or_else(|| vec!["i".into(), "ii".into()]);
        if names.is_empty() {
            return Err(CliError::Config("`models` must name at least one model".into()));
        }
        let mut models = Vec::new();
        for name in names {
            let p = match name.as_str() {
                "i" => SmithParams::model_i(),
                "ii" => SmithParams::model_ii(),
                "custom" => match (s.alpha, s.beta, s.gamma) {
                    (Some(a), Some(b), Some(g)) => SmithParams::new(a, b, g)?,
                    _ => return Err(CliError::Config("model `custom` needs alpha, beta and gamma".into())),
                },
                other => return Err(CliError::Config(format!("unknown model `{other}` (expected i, ii or custom)"))),
            };
            if models.iter().any(|(n, _)| *n == name) {
                return Err(CliError::Config(format!("model `{name}` listed twice")));
            }
            models.push((name, p));
        }
        let defaults = FitOptions::default();
        let fit = FitOptions {
            max_evals: s.max_evals.unwrap_or(defaults.max_evals),
            restarts: s.restarts.unwrap_or(defaults.restarts),
            jitter: s.jitter.unwrap_or(defaults.jitter),
            tol_f: s.tol_f.unwrap_or(defaults.tol_f),
            tol_x: s.tol_x.unwrap_or(defaults.tol_x),
            interpolate: s.interpolate.unwrap_or(defaults.interpolate),
            ..defaults
        };
        let resolved = Self {
            models,
            n: s.n.unwrap_or(20),
            days: s.days.unwrap_or(1000),
            m: s.m.unwrap_or(100),
            replications: s.replications.unwrap_or(100),
            n_grid: s.n_grid.clone().unwrap_or_else(|| (1..=10).map(|k| 500 * k).collect()),
            mc_panels: s.mc_panels.unwrap_or(200),
            seed: s.seed.unwrap_or(2024),
            fit,
        };
        for (_, p) in &resolved.models {
            resolved.study_config(p)?.validate()?;
        }
        Ok(resolved)
    }

    /// Station layout and panels are seeded from `seed`, so every model sees
    /// the same stations.
    pub fn study_config(&self, theta0: &SmithParams) -> CliResult<StudyConfig> {
        Ok(StudyConfig {
            theta0: *theta0,
            layout: sample_stations(self.n, self.seed)?,
            days: self.days,
            m: self.m,
            replications: self.replications,
            n_grid: self.n_grid.clone(),
            seed: self.seed,
            mc_panels: self.mc_panels,
            fit: self.fit,
        })
    }

    /// Fully explicit section, as written to manifests.
    pub fn to_section(&self) -> StudySection {
        let custom = self.models.iter().find(|(n, _)| n == "custom").map(|(_, p)| *p);
        StudySection {
            models: Some(self.models.iter().map(|(n, _)| n.clone()).collect()),
            alpha: custom.map(|p| p.alpha),
            beta: custom.map(|p| p.beta),
            gamma: custom.map(|p| p.gamma),
            n: Some(self.n),
            days: Some(self.days),
            m: Some(self.m),
            replications: Some(self.replications),
            n_grid: Some(self.n_grid.clone()),
            mc_panels: Some(self.mc_panels),
            seed: Some(self.seed),
            max_evals: Some(self.fit.max_evals),
            restarts: Some(self.fit.restarts),
            jitter: Some(self.fit.jitter),
            tol_f: Some(self.fit.tol_f),
            tol_x: Some(self.fit.tol_x),
            interpolate: Some(self.fit.interpolate),
        }
    }
}
