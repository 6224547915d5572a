//! Monte Carlo study harness: information and score moments at the true
//! parameter, first-order bias and variance curves over the threshold grid,
//! replicated fits, MSE sweeps and extremal coefficient layers.

use alloc::vec::Vec;

use crate::design::{pair_weights, sample_stations, PairTable, StationLayout};
use crate::error::{bail, Error, Result};
use crate::estimate::{default_init, fit_prepared, FitOptions};
use crate::exec::{Executor, Sequential};
use crate::likelihood::PreparedPanel;
use crate::linalg::{inverse, mat_vec, outer, sandwich, sym_eigenvalues, symmetrize, Mat3, Vec3};
use crate::margins::frechet_quantile;
use crate::math::sqrt;
use crate::maxstable::{smith_extremal_coefficient, SmithParams};
use crate::rng::derive_seed;
use crate::simulate::{simulate_daily_panel, threshold_for_count, DailyPanel, ThresholdSpec};

pub const PARAM_NAMES: [&str; 3] = ["alpha", "beta", "gamma"];

const TAG_REPLICATION: u64 = 0x5245_504c;
const TAG_MC: u64 = 0x4d43_5041;
const TAG_FIT: u64 = 0x4649_5453;

/// Flag an empirical point once more than this share of its fits fail.
pub const UNCONVERGED_FLAG_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub theta0: SmithParams,
    pub layout: StationLayout,
    pub days: usize,
    pub m: usize,
    pub replications: usize,
    /// Exceedance counts `N`, strictly increasing.
    pub n_grid: Vec<usize>,
    pub seed: u64,
    /// Panels behind each Monte Carlo moment.
    pub mc_panels: usize,
    pub fit: FitOptions,
}

impl StudyConfig {
    /// Twenty stations, 1000 days in 10 years, `N` in 500..=5000, 100
    /// replications and 200 Monte Carlo panels.
    pub fn standard(theta0: SmithParams, seed: u64) -> Result<Self> {
        Ok(Self {
            theta0,
            layout: sample_stations(20, seed)?,
            days: 1000,
            m: 100,
            replications: 100,
            n_grid: (1..=10).map(|k| 500 * k).collect(),
            seed,
            mc_panels: 200,
            fit: FitOptions::default(),
        })
    }

    pub fn n_stations(&self) -> usize {
        self.layout.sites.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta0.is_positive_definite() {
            bail!(Parameter, "theta0 is not positive definite: {:?}", self.theta0);
        }
        if self.replications < 2 {
            bail!(Config, "need at least 2 replications, got {}", self.replications);
        }
        if self.mc_panels < 2 {
            bail!(Config, "need at least 2 Monte Carlo panels, got {}", self.mc_panels);
        }
        if self.days == 0 || self.m == 0 {
            bail!(Config, "days and days per year must be >= 1");
        }
        if self.n_grid.is_empty() {
            bail!(Config, "exceedance grid is empty");
        }
        let total = self.days * self.n_stations();
        for w in self.n_grid.windows(2) {
            if w[1] <= w[0] {
                bail!(Config, "exceedance grid must be strictly increasing: {} then {}", w[0], w[1]);
            }
        }
        if self.n_grid[0] == 0 || *self.n_grid.last().unwrap() >= total {
            bail!(Config, "every N must lie in [1, {}), got {:?}", total, self.n_grid);
        }
        self.fit.validate()
    }

    /// Quantile level implied by `N` exceedances among `T n` values.
    pub fn implied_quantile(&self, n_exceed: usize) -> f64 {
        1.0 - n_exceed as f64 / (self.days * self.n_stations()) as f64
    }

    /// Population threshold with `N` expected exceedances; fixed across
    /// Monte Carlo panels.
    pub fn population_threshold(&self, n_exceed: usize) -> Result<f64> {
        frechet_quantile(self.implied_quantile(n_exceed))
    }

    pub fn weights(&self) -> PairTable {
        pair_weights(&self.layout)
    }

    pub fn replication_panel(&self, r: usize) -> Result<DailyPanel> {
        let seed = derive_seed(derive_seed(self.seed, TAG_REPLICATION), r as u64);
        simulate_daily_panel(&self.layout, &self.theta0, self.days, self.m, seed)
    }

    fn mc_panel(&self, k: usize) -> Result<DailyPanel> {
        let seed = derive_seed(derive_seed(self.seed, TAG_MC), k as u64);
        simulate_daily_panel(&self.layout, &self.theta0, self.days, self.m, seed)
    }

    fn grid_index(&self, n_exceed: usize) -> Result<usize> {
        self.n_grid
            .iter()
            .position(|&n| n == n_exceed)
            .ok_or_else(|| Error::Config(alloc::format!("N = {n_exceed} is not on the study grid")))
    }
}

/// Monte Carlo moments of the per-panel composite score at `theta0`.
#[derive(Debug, Clone, PartialEq)]
pub struct McMoments {
    pub n_exceed: usize,
    pub threshold: f64,
    pub panels: usize,
    /// Mean of `-d^2 l / d theta d theta^T`, symmetrised.
    pub hessian: Mat3,
    /// Monte Carlo standard error of `trace(hessian)`.
    pub hessian_trace_se: f64,
    pub mean_score: Vec3,
    pub mean_score_se: Vec3,
    /// Centred sample covariance of the score.
    pub score_cov: Mat3,
    pub hessian_eigenvalues: Vec3,
}

impl McMoments {
    pub fn is_degenerate(&self) -> bool {
        !self.hessian_eigenvalues.iter().all(|&e| e > 0.0)
    }
}

fn reduce_moments(n_exceed: usize, threshold: f64, draws: &[(Vec3, Mat3)]) -> McMoments {
    let m = draws.len() as f64;
    let mut hess = [[0.0; 3]; 3];
    let mut score = [0.0; 3];
    let mut tr = (0.0, 0.0);
    for (g, h) in draws {
        for i in 0..3 {
            score[i] += g[i] / m;
            for j in 0..3 {
                hess[i][j] -= h[i][j] / m;
            }
        }
        let t = -(h[0][0] + h[1][1] + h[2][2]);
        tr.0 += t;
        tr.1 += t * t;
    }
    let mut cov = [[0.0; 3]; 3];
    for (g, _) in draws {
        let c = [g[0] - score[0], g[1] - score[1], g[2] - score[2]];
        let o = outer(&c, &c);
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += o[i][j] / (m - 1.0);
            }
        }
    }
    let tr_mean = tr.0 / m;
    let tr_var = ((tr.1 - m * tr_mean * tr_mean) / (m - 1.0)).max(0.0);
    let hessian = symmetrize(&hess);
    McMoments {
        n_exceed,
        threshold,
        panels: draws.len(),
        hessian,
        hessian_trace_se: sqrt(tr_var / m),
        mean_score: score,
        mean_score_se: [0, 1, 2].map(|i| sqrt(cov[i][i] / m)),
        score_cov: symmetrize(&cov),
        hessian_eigenvalues: sym_eigenvalues(&hessian),
    }
}

/// Moments at each `N` in `grid`, sharing the same Monte Carlo panels
/// across thresholds. Each panel is censored at the population threshold
/// for `N`, and derivatives are taken analytically at `theta0`.
pub fn mc_moments_for<E: Executor>(study: &StudyConfig, grid: &[usize], exec: &E) -> Result<Vec<McMoments>> {
    study.validate()?;
    let weights = study.weights();
    let thresholds: Vec<f64> = grid.iter().map(|&n| study.population_threshold(n)).collect::<Result<_>>()?;
    let per_panel = exec.map(study.mc_panels, |k| -> Result<Vec<(Vec3, Mat3)>> {
        let panel = study.mc_panel(k)?;
        thresholds
            .iter()
            .map(|&u| {
                let d = PreparedPanel::with_threshold(&panel, &weights, u)?.loglik_derivs(&study.theta0)?;
                Ok((d.grad, d.hess))
            })
            .collect()
    });
    let per_panel: Vec<Vec<(Vec3, Mat3)>> = per_panel.into_iter().collect::<Result<_>>()?;
    Ok(grid
        .iter()
        .zip(&thresholds)
        .enumerate()
        .map(|(k, (&n, &u))| {
            let draws: Vec<(Vec3, Mat3)> = per_panel.iter().map(|p| p[k]).collect();
            reduce_moments(n, u, &draws)
        })
        .collect())
}

pub fn mc_moments<E: Executor>(study: &StudyConfig, exec: &E) -> Result<Vec<McMoments>> {
    mc_moments_for(study, &study.n_grid, exec)
}

/// `H = E[-D'(theta0)]` at one grid point; an indefinite estimate is an error.
pub fn mc_hessian(study: &StudyConfig, n_exceed: usize) -> Result<Mat3> {
    study.grid_index(n_exceed)?;
    let m = mc_moments_for(study, &[n_exceed], &Sequential)?.remove(0);
    if m.is_degenerate() {
        bail!(Degenerate, "Monte Carlo information is indefinite at N = {n_exceed}: eigenvalues {:?}", m.hessian_eigenvalues);
    }
    Ok(m.hessian)
}

/// Mean score and its covariance at one grid point.
pub fn mc_score_moments(study: &StudyConfig, n_exceed: usize) -> Result<(Vec3, Mat3)> {
    study.grid_index(n_exceed)?;
    let m = mc_moments_for(study, &[n_exceed], &Sequential)?.remove(0);
    Ok((m.mean_score, m.score_cov))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoreticalPoint {
    pub n_exceed: usize,
    pub threshold: f64,
    /// `H^-1 E[score]`; `None` when `H` is degenerate.
    pub bias: Option<Vec3>,
    /// Diagonal of `H^-1 V H^-1`.
    pub variance: Option<Vec3>,
    pub moments: McMoments,
}

pub fn theoretical_from_moments(moments: &[McMoments]) -> Vec<TheoreticalPoint> {
    moments
        .iter()
        .map(|m| {
            let inv = if m.is_degenerate() { None } else { inverse(&m.hessian).ok() };
            let bias = inv.map(|h| mat_vec(&h, &m.mean_score));
            let variance = inv.map(|h| {
                let s = sandwich(&h, &m.score_cov);
                [s[0][0], s[1][1], s[2][2]]
            });
            TheoreticalPoint { n_exceed: m.n_exceed, threshold: m.threshold, bias, variance, moments: m.clone() }
        })
        .collect()
}

pub fn theoretical_bias_variance<E: Executor>(study: &StudyConfig, exec: &E) -> Result<Vec<TheoreticalPoint>> {
    Ok(theoretical_from_moments(&mc_moments(study, exec)?))
}

/// What produces `theta_hat` for a replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    Fit(FitOptions),
    /// Skip fitting and report `theta0`; a harness check.
    InjectTruth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationFit {
    pub theta: Vec3,
    pub converged: bool,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPoint {
    pub n_exceed: usize,
    pub mean_threshold: f64,
    pub mean_theta: Vec3,
    pub bias: Vec3,
    pub sd: Vec3,
    pub ci_lo: Vec3,
    pub ci_hi: Vec3,
    pub n_used: usize,
    pub n_unconverged: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalStudy {
    pub points: Vec<EmpiricalPoint>,
    /// `fits[r][k]`: replication `r` at grid point `k`.
    pub fits: Vec<Vec<ReplicationFit>>,
}

/// Fits one replication across the grid in increasing `N`, starting each
/// fit from the previous estimate on the same panel.
fn replicate(study: &StudyConfig, weights: &PairTable, estimator: &Estimator, r: usize) -> Result<Vec<ReplicationFit>> {
    let panel = study.replication_panel(r)?;
    let mut out = Vec::with_capacity(study.n_grid.len());
    let mut warm: Option<SmithParams> = None;
    let rep_seed = derive_seed(derive_seed(study.seed, TAG_FIT), r as u64);
    for &n in &study.n_grid {
        let u = threshold_for_count(&panel, n)?;
        let fit = match estimator {
            Estimator::InjectTruth => ReplicationFit { theta: study.theta0.as_array(), converged: true, threshold: u },
            Estimator::Fit(opts) => {
                let prep = PreparedPanel::with_threshold(&panel, weights, u)?;
                let init = match (opts.init, warm) {
                    (Some(p), _) | (None, Some(p)) => p,
                    (None, None) => default_init(&panel, weights)?,
                };
                let opts = FitOptions { seed: derive_seed(rep_seed, n as u64), ..*opts };
                match fit_prepared(&prep, &init, &opts) {
                    Ok(f) => {
                        warm = Some(f.theta_hat);
                        ReplicationFit { theta: f.theta_hat.as_array(), converged: f.converged, threshold: u }
                    }
                    Err(Error::Degenerate(_)) => ReplicationFit { theta: [f64::NAN; 3], converged: false, threshold: u },
                    Err(e) => return Err(e),
                }
            }
        };
        out.push(fit);
    }
    Ok(out)
}

fn summarize(n_exceed: usize, theta0: &Vec3, fits: &[ReplicationFit]) -> EmpiricalPoint {
    let used: Vec<&ReplicationFit> = fits.iter().filter(|f| f.converged && f.theta.iter().all(|v| v.is_finite())).collect();
    let k = used.len();
    let n_unconverged = fits.len() - k;
    let mut mean = [f64::NAN; 3];
    let mut sd = [f64::NAN; 3];
    if k > 0 {
        for i in 0..3 {
            let mu = used.iter().map(|f| f.theta[i]).sum::<f64>() / k as f64;
            mean[i] = mu;
            sd[i] = if k > 1 {
                sqrt(used.iter().map(|f| (f.theta[i] - mu) * (f.theta[i] - mu)).sum::<f64>() / (k - 1) as f64)
            } else {
                f64::NAN
            };
        }
    }
    let bias = [0, 1, 2].map(|i| mean[i] - theta0[i]);
    let half = [0, 1, 2].map(|i| 1.96 * sd[i] / sqrt(k as f64));
    EmpiricalPoint {
        n_exceed,
        mean_threshold: fits.iter().map(|f| f.threshold).sum::<f64>() / fits.len() as f64,
        mean_theta: mean,
        bias,
        sd,
        ci_lo: [0, 1, 2].map(|i| bias[i] - half[i]),
        ci_hi: [0, 1, 2].map(|i| bias[i] + half[i]),
        n_used: k,
        n_unconverged,
        flagged: n_unconverged as f64 > UNCONVERGED_FLAG_SHARE * fits.len() as f64,
    }
}

/// Replicated fits at every grid point with normal-theory 95% bands
/// `mean +- 1.96 sd / sqrt(R)`. Each replication uses the per-panel
/// threshold leaving exactly `N` exceedances.
pub fn empirical_bias<E: Executor>(study: &StudyConfig, estimator: &Estimator, exec: &E) -> Result<EmpiricalStudy> {
    study.validate()?;
    let weights = study.weights();
    let fits = exec.map(study.replications, |r| replicate(study, &weights, estimator, r));
    let fits: Vec<Vec<ReplicationFit>> = fits.into_iter().collect::<Result<_>>()?;
    let theta0 = study.theta0.as_array();
    let points = study
        .n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let col: Vec<ReplicationFit> = fits.iter().map(|f| f[k]).collect();
            summarize(n, &theta0, &col)
        })
        .collect();
    Ok(EmpiricalStudy { points, fits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub param: usize,
    pub n_exceed: usize,
    pub threshold: f64,
    pub empirical_bias: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub theoretical_bias: Option<f64>,
    pub variance: Option<f64>,
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub rows: Vec<ReportRow>,
    /// MSE-minimising `N` per parameter.
    pub argmin: [Option<usize>; 3],
    /// MSE-minimising `N` for the sum over parameters.
    pub pooled_argmin: Option<usize>,
}

impl StudyReport {
    pub fn rows_for(&self, param: usize) -> impl Iterator<Item = &ReportRow> + '_ {
        self.rows.iter().filter(move |r| r.param == param)
    }

    /// `(N, sum of per-parameter MSE)` where all three are available.
    pub fn pooled_mse(&self) -> Vec<(usize, f64)> {
        self.rows_for(0)
            .map(|r| r.n_exceed)
            .filter_map(|n| {
                let v: Option<Vec<f64>> = self.rows.iter().filter(|r| r.n_exceed == n).map(|r| r.mse).collect();
                v.map(|v| (n, v.iter().sum()))
            })
            .collect()
    }
}

fn argmin(points: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    points.filter(|p| p.1.is_finite()).min_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0)
}

/// Joins theoretical curves with optional empirical ones; `mse = bias^2 + var`
/// from the theoretical side.
pub fn build_report(theo: &[TheoreticalPoint], emp: Option<&[EmpiricalPoint]>) -> StudyReport {
    let mut rows = Vec::with_capacity(3 * theo.len());
    for param in 0..3 {
        for (k, t) in theo.iter().enumerate() {
            let e = emp.and_then(|e| e.get(k)).filter(|e| e.n_exceed == t.n_exceed && e.n_used > 0);
            let bias = t.bias.map(|b| b[param]);
            let variance = t.variance.map(|v| v[param]);
            let mse = match (bias, variance) {
                (Some(b), Some(v)) => Some(b * b + v),
                _ => None,
            };
            rows.push(ReportRow {
                param,
                n_exceed: t.n_exceed,
                threshold: t.threshold,
                empirical_bias: e.map(|e| e.bias[param]),
                ci_lo: e.map(|e| e.ci_lo[param]),
                ci_hi: e.map(|e| e.ci_hi[param]),
                theoretical_bias: bias,
                variance,
                mse,
            });
        }
    }
    let mut report = StudyReport { rows, argmin: [None; 3], pooled_argmin: None };
    for p in 0..3 {
        report.argmin[p] = argmin(report.rows_for(p).filter_map(|r| r.mse.map(|m| (r.n_exceed, m))));
    }
    report.pooled_argmin = argmin(report.pooled_mse().into_iter());
    report
}

pub fn mse_sweep<E: Executor>(study: &StudyConfig, exec: &E) -> Result<StudyReport> {
    Ok(build_report(&theoretical_bias_variance(study, exec)?, None))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerRow {
    pub n_exceed: usize,
    pub h: f64,
    pub theta_true: f64,
    /// Curve at `theta0 + bias`; `None` when that is not a valid covariance.
    pub theta_theoretical: Option<f64>,
    /// Curve at the mean fitted parameter.
    pub theta_fitted: Option<f64>,
}

pub const LAYER_POINTS: usize = 50;

/// Extremal coefficient along the first coordinate axis at distance `h`.
pub fn axis_extremal_coefficient(p: &SmithParams, h: f64) -> f64 {
    smith_extremal_coefficient(sqrt(p.quad_form_inv([h, 0.0])))
}

/// For each grid point, `h -> 2 Phi(a(h)/2)` along the first axis on
/// `[0, sqrt(2n)]` for the true parameter, `theta0 + bias` and the mean fit.
pub fn extremal_coefficient_layers(study: &StudyConfig, theo: &[TheoreticalPoint], emp: &[EmpiricalPoint]) -> Vec<LayerRow> {
    let h_max = sqrt(2.0 * study.n_stations() as f64);
    let valid = |v: Vec3| {
        let p = SmithParams::from_array(v);
        (v.iter().all(|x| x.is_finite()) && p.is_positive_definite()).then_some(p)
    };
    let t0 = study.theta0.as_array();
    let mut rows = Vec::new();
    for (k, &n) in study.n_grid.iter().enumerate() {
        let theoretical = theo
            .iter()
            .find(|t| t.n_exceed == n)
            .and_then(|t| t.bias)
            .and_then(|b| valid([t0[0] + b[0], t0[1] + b[1], t0[2] + b[2]]));
        let fitted = emp.get(k).filter(|e| e.n_exceed == n).and_then(|e| valid(e.mean_theta));
        for i in 0..LAYER_POINTS {
            let h = h_max * i as f64 / (LAYER_POINTS - 1) as f64;
            rows.push(LayerRow {
                n_exceed: n,
                h,
                theta_true: axis_extremal_coefficient(&study.theta0, h),
                theta_theoretical: theoretical.map(|p| axis_extremal_coefficient(&p, h)),
                theta_fitted: fitted.map(|p| axis_extremal_coefficient(&p, h)),
            });
        }
    }
    rows
}

/// `(N, max_h |fitted - true|)` per grid point with a fitted curve.
pub fn layer_gaps(rows: &[LayerRow]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    for r in rows {
        let Some(f) = r.theta_fitted else { continue };
        let gap = (f - r.theta_true).abs();
        match out.last_mut() {
            Some(last) if last.0 == r.n_exceed => last.1 = last.1.max(gap),
            _ => out.push((r.n_exceed, gap)),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmsePoint {
    pub days: usize,
    pub rmse: Vec3,
    /// Delta-method standard error of each RMSE.
    pub rmse_se: Vec3,
    pub n_used: usize,
}

/// Component RMSE of the fit at a fixed threshold quantile over nested
/// record lengths: every replication simulates the longest panel once and
/// fits its leading `days` rows for each entry of `days_list`.
pub fn consistency_sweep<E: Executor>(
    study: &StudyConfig,
    days_list: &[usize],
    quantile: f64,
    exec: &E,
) -> Result<Vec<RmsePoint>> {
    let longest = *days_list.iter().max().ok_or_else(|| Error::Config("empty record-length list".into()))?;
    let study = StudyConfig { days: longest, ..study.clone() };
    study.validate()?;
    ThresholdSpec::Quantile(quantile).validate()?;
    let weights = study.weights();
    let per_rep = exec.map(study.replications, |r| -> Result<Vec<Option<Vec3>>> {
        let full = study.replication_panel(r)?;
        let rep_seed = derive_seed(derive_seed(study.seed, TAG_FIT), r as u64);
        days_list
            .iter()
            .map(|&d| {
                let panel = full.truncated(d)?;
                let u = ThresholdSpec::Quantile(quantile).resolve(&panel)?;
                let prep = PreparedPanel::with_threshold(&panel, &weights, u)?;
                let init = match study.fit.init {
                    Some(p) => p,
                    None => default_init(&panel, &weights)?,
                };
                let opts = FitOptions { seed: derive_seed(rep_seed, d as u64), ..study.fit };
                match fit_prepared(&prep, &init, &opts) {
                    Ok(f) if f.converged => Ok(Some(f.theta_hat.as_array())),
                    Ok(_) | Err(Error::Degenerate(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    });
    let per_rep: Vec<Vec<Option<Vec3>>> = per_rep.into_iter().collect::<Result<_>>()?;
    let t0 = study.theta0.as_array();
    Ok(days_list
        .iter()
        .enumerate()
        .map(|(k, &days)| {
            let errs: Vec<Vec3> = per_rep.iter().filter_map(|r| r[k]).map(|t| [0, 1, 2].map(|i| t[i] - t0[i])).collect();
            let n = errs.len() as f64;
            let mut rmse = [f64::NAN; 3];
            let mut se = [f64::NAN; 3];
            for i in 0..3 {
                let sq: Vec<f64> = errs.iter().map(|e| e[i] * e[i]).collect();
                let mse = sq.iter().sum::<f64>() / n;
                let var = sq.iter().map(|s| (s - mse) * (s - mse)).sum::<f64>() / (n - 1.0);
                rmse[i] = sqrt(mse);
                // d sqrt(m) = dm / (2 sqrt(m))
                se[i] = sqrt(var / n) / (2.0 * rmse[i]);
            }
            RmsePoint { days, rmse, rmse_se: se, n_used: errs.len() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::is_positive_definite;

    fn small(theta0: SmithParams) -> StudyConfig {
        StudyConfig {
            theta0,
            layout: sample_stations(6, 3).unwrap(),
            days: 200,
            m: 20,
            replications: 4,
            n_grid: alloc::vec![40, 120],
            seed: 11,
            mc_panels: 30,
            fit: FitOptions { restarts: 0, ..FitOptions::default() },
        }
    }

    #[test]
    fn config_validation() {
        let s = small(SmithParams::model_i());
        assert!(s.validate().is_ok());
        assert!(StudyConfig { replications: 1, ..s.clone() }.validate().is_err());
        assert!(StudyConfig { n_grid: alloc::vec![120, 40], ..s.clone() }.validate().is_err());
        assert!(StudyConfig { n_grid: alloc::vec![40, 1200], ..s.clone() }.validate().is_err());
        assert!((s.implied_quantile(120) - 0.9).abs() < 1e-15);
        let std = StudyConfig::standard(SmithParams::model_ii(), 1).unwrap();
        assert!(std.validate().is_ok());
        assert!((std.implied_quantile(1000) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn moments_shape_and_determinism() {
        let s = small(SmithParams::model_i());
        let m = mc_moments(&s, &Sequential).unwrap();
        assert_eq!(m.len(), 2);
        for mm in &m {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((mm.hessian[i][j] - mm.hessian[j][i]).abs() <= 1e-8 * mm.hessian[i][i].abs());
                    assert_eq!(mm.score_cov[i][j], mm.score_cov[j][i]);
                }
            }
            assert!(is_positive_definite(&mm.hessian));
            assert!(sym_eigenvalues(&mm.score_cov).iter().all(|&e| e >= -1e-9));
            // correctly specified model: unbiased score
            for i in 0..3 {
                assert!(mm.mean_score[i].abs() < 4.0 * mm.mean_score_se[i], "{:?}", mm);
            }
        }
        assert_eq!(m, mc_moments(&s, &Sequential).unwrap());
        let h = mc_hessian(&s, 40).unwrap();
        assert_eq!(h, m[0].hessian);
        assert_eq!(mc_score_moments(&s, 120).unwrap(), (m[1].mean_score, m[1].score_cov));
        assert!(mc_hessian(&s, 41).is_err());
        let theo = theoretical_from_moments(&m);
        assert!(theo.iter().all(|t| t.variance.unwrap().iter().all(|&v| v > 0.0)));
    }

    #[test]
    fn injected_truth_has_no_bias() {
        let s = small(SmithParams::model_i());
        let e = empirical_bias(&s, &Estimator::InjectTruth, &Sequential).unwrap();
        for p in &e.points {
            assert_eq!(p.bias, [0.0; 3]);
            assert_eq!(p.ci_lo, p.ci_hi);
            assert!(!p.flagged);
        }
    }

    #[test]
    fn replicated_fits_and_report() {
        let s = small(SmithParams::model_i());
        let e = empirical_bias(&s, &Estimator::Fit(s.fit), &Sequential).unwrap();
        assert_eq!(e.fits.len(), 4);
        for p in &e.points {
            for i in 0..3 {
                assert!(p.ci_lo[i] <= p.bias[i] && p.bias[i] <= p.ci_hi[i]);
            }
        }
        let theo = theoretical_bias_variance(&s, &Sequential).unwrap();
        let rep = build_report(&theo, Some(&e.points));
        assert_eq!(rep.rows.len(), 6);
        for r in &rep.rows {
            let (b, v, m) = (r.theoretical_bias.unwrap(), r.variance.unwrap(), r.mse.unwrap());
            assert_eq!(m, b * b + v);
            assert!(m >= v);
        }
        assert!(rep.pooled_argmin.is_some());
        let layers = extremal_coefficient_layers(&s, &theo, &e.points);
        assert_eq!(layers.len(), 2 * LAYER_POINTS);
        for r in &layers {
            for v in [Some(r.theta_true), r.theta_theoretical, r.theta_fitted].into_iter().flatten() {
                assert!((1.0..=2.0).contains(&v));
                if r.h == 0.0 {
                    assert_eq!(v, 1.0);
                }
            }
        }
        assert_eq!(layer_gaps(&layers).len(), 2);
    }

    #[test]
    fn axis_curve_model_i() {
        let p = SmithParams::model_i();
        for h in [0.0, 0.7, 2.5, 6.0] {
            let want = 2.0 * crate::math::std_normal_cdf(h / (2.0 * core::f64::consts::SQRT_2));
            assert!((axis_extremal_coefficient(&p, h) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn single_pair_bartlett_identity() {
        // one pair: the composite likelihood is the full likelihood, so V = H
        let layout = StationLayout::from_sites(alloc::vec![[0.0, 0.0], [0.6, 0.3]], 1.0, 0).unwrap();
        let s = StudyConfig {
            theta0: SmithParams::model_ii(),
            layout,
            days: 40,
            m: 10,
            replications: 2,
            n_grid: alloc::vec![70],
            seed: 5,
            mc_panels: 4000,
            fit: FitOptions::default(),
        };
        let m = mc_moments(&s, &Sequential).unwrap().remove(0);
        let norm = |a: &Mat3| sqrt(a.iter().flatten().map(|v| v * v).sum::<f64>());
        let mut d = m.hessian;
        for i in 0..3 {
            for j in 0..3 {
                d[i][j] -= m.score_cov[i][j];
            }
        }
        assert!(norm(&d) / norm(&m.hessian) < 0.1, "{:?} vs {:?}", m.hessian, m.score_cov);
    }
}
