//! Maximum censored pairwise composite likelihood fit of the Smith covariance.
//!
//! The optimiser works on log-Cholesky coordinates `(log L11, L21, log L22)`
//! with `Sigma = L L^T`, so every point it visits is positive definite.

use alloc::vec::Vec;

use crate::design::PairTable;
use crate::error::{bail, Result};
use crate::likelihood::{CensoredConfig, InterpolatedPanel, PreparedPanel};
use crate::math::{exp, log, pow, sqrt, std_normal_quantile};
use crate::maxstable::{naive_extremal_estimator, SmithParams};
use crate::optim::{nelder_mead, NelderMeadOptions};
use crate::rng::{substream, uniform01};
use crate::simulate::{count_exceedances, DailyPanel};

/// Half-width in `log a` of the interpolation range around the start.
const INTERP_WIDTH: f64 = 1.5;

pub fn reparameterize(p: &SmithParams) -> Result<[f64; 3]> {
    if !p.is_positive_definite() {
        bail!(Parameter, "Sigma is not positive definite: {p:?}");
    }
    let l11 = sqrt(p.alpha);
    let l21 = p.beta / l11;
    let l22 = sqrt(p.gamma - l21 * l21);
    Ok([log(l11), l21, log(l22)])
}

pub fn unreparameterize(raw: &[f64; 3]) -> SmithParams {
    let l11 = exp(raw[0]);
    let l21 = raw[1];
    let l22 = exp(raw[2]);
    SmithParams { alpha: l11 * l11, beta: l11 * l21, gamma: l21 * l21 + l22 * l22 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Starting value; `None` uses [`default_init`].
    pub init: Option<SmithParams>,
    pub max_evals: usize,
    /// Tolerance on the spread of the per pair-day mean negative log-likelihood.
    pub tol_f: f64,
    /// Tolerance on the simplex size in log-Cholesky coordinates.
    pub tol_x: f64,
    /// Extra jittered runs started from the best point so far.
    pub restarts: usize,
    pub jitter: f64,
    pub seed: u64,
    /// Evaluate through per-pair interpolants in `log a` (exact evaluation
    /// outside their range); the reported log-likelihoods are always exact.
    pub interpolate: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { init: None, max_evals: 3000, tol_f: 1e-10, tol_x: 1e-5, restarts: 3, jitter: 1.2, seed: 0, interpolate: true }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_f > 0.0 && self.tol_x > 0.0) {
            bail!(Config, "tolerances must be > 0");
        }
        if !(self.jitter >= 1.0) {
            bail!(Config, "jitter factor must be >= 1, got {}", self.jitter);
        }
        if self.max_evals == 0 {
            bail!(Config, "max_evals must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: SmithParams,
    pub loglik_at_opt: f64,
    pub loglik_at_init: f64,
    pub init: SmithParams,
    pub converged: bool,
    pub evals: usize,
    pub case_counts: [u64; 4],
    pub threshold: f64,
    /// Pooled marginal exceedances of the threshold.
    pub n_exceed: usize,
}

/// Moment-type start from naive pairwise extremal coefficients.
///
/// Each weighted pair's naive estimate is inverted through
/// `theta = 2 Phi(a/2)` and turned into an isotropic variance `h^2 / a^2`;
/// the start is the median over pairs whose estimate is informative
/// (strictly inside `(1, 2)`), or the nearest pair alone if none is.
pub fn default_init(panel: &DailyPanel, weights: &PairTable) -> Result<SmithParams> {
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for pair in weights.weighted().filter(|p| p.h > 0.0) {
        let theta = naive_extremal_estimator((0..panel.days()).map(|d| (panel.get(d, pair.i), panel.get(d, pair.j))))?;
        candidates.push((pair.h, theta));
    }
    if candidates.is_empty() {
        bail!(Config, "no weighted pair with positive separation");
    }
    let var_of = |h: f64, theta: f64| {
        let a = 2.0 * std_normal_quantile(0.5 * theta.clamp(1.05, 1.95));
        h * h / (a * a)
    };
    let mut vars: Vec<f64> = candidates
        .iter()
        .filter(|(_, t)| *t > 1.1 && *t < 1.9)
        .map(|&(h, t)| var_of(h, t))
        .collect();
    let s2 = if vars.is_empty() {
        let &(h, t) = candidates.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
        var_of(h, t)
    } else {
        vars.sort_by(|a, b| a.total_cmp(b));
        let m = vars.len();
        if m % 2 == 1 {
            vars[m / 2]
        } else {
            0.5 * (vars[m / 2 - 1] + vars[m / 2])
        }
    };
    SmithParams::new(s2, 0.0, s2)
}

pub fn fit_dependence(panel: &DailyPanel, config: &CensoredConfig<'_>, opts: &FitOptions) -> Result<FitResult> {
    let prep = PreparedPanel::new(panel, config)?;
    let init = match opts.init {
        Some(p) => p,
        None => default_init(panel, config.weights)?,
    };
    let mut res = fit_prepared(&prep, &init, opts)?;
    res.n_exceed = count_exceedances(panel, prep.threshold());
    Ok(res)
}

/// Fit on an already prepared panel; `n_exceed` is left at zero.
pub fn fit_prepared(prep: &PreparedPanel, init: &SmithParams, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    let x0 = reparameterize(init)?;
    let scale = 1.0 / (prep.days() * prep.pairs().len()) as f64;
    let interp = if opts.interpolate { Some(InterpolatedPanel::new(prep, init, INTERP_WIDTH)?) } else { None };
    let objective = |x: &[f64]| -> f64 {
        let p = unreparameterize(&[x[0], x[1], x[2]]);
        let l = match &interp {
            Some(ip) => ip.loglik(&p),
            None => prep.loglik(&p).map(|r| r.0),
        };
        l.map_or(f64::INFINITY, |l| -l * scale)
    };
    let exact = |x: &[f64]| prep.loglik(&unreparameterize(&[x[0], x[1], x[2]])).map(|r| r.0);
    let f_init = objective(&x0);
    if !f_init.is_finite() {
        bail!(Degenerate, "log-likelihood is not finite at the initial value {init:?}");
    }
    let nm = NelderMeadOptions { max_evals: opts.max_evals, tol_f: opts.tol_f, tol_x: opts.tol_x, step: 0.25 };
    let mut best = nelder_mead(objective, &x0, &nm);
    let mut evals = best.evals + 1;
    let mut converged = best.converged;
    let mut rng = substream(opts.seed, 0x6a17);
    let ln_j = log(opts.jitter);
    for _ in 0..opts.restarts {
        let start: Vec<f64> = best
            .x
            .iter()
            .map(|&v| {
                let m = pow(opts.jitter, 2.0 * uniform01(&mut rng) - 1.0);
                // the additive part moves coordinates sitting at zero
                v * m + (m - 1.0) * if ln_j > 0.0 { 1.0 } else { 0.0 }
            })
            .collect();
        let nm_r = NelderMeadOptions { step: 0.1, ..nm };
        let run = nelder_mead(objective, &start, &nm_r);
        evals += run.evals;
        converged |= run.converged;
        if run.fx < best.fx {
            best = run;
        }
    }
    let l_init = exact(&x0)?;
    let l_best = exact(&best.x)?;
    let (x_best, l_best) = if l_best >= l_init { (best.x, l_best) } else { (x0.to_vec(), l_init) };
    Ok(FitResult {
        theta_hat: unreparameterize(&[x_best[0], x_best[1], x_best[2]]),
        loglik_at_opt: l_best,
        loglik_at_init: l_init,
        init: *init,
        converged,
        evals,
        case_counts: prep.case_counts(),
        threshold: prep.threshold(),
        n_exceed: 0,
    })
}
