//! Threshold-censored pairwise composite likelihood for the Smith model.
//!
//! For a pair of stations with common threshold `u`, a day contributes
//!
//! | case | data            | contribution                  |
//! |------|-----------------|-------------------------------|
//! | 1    | both `<= u`     | `F(u, u)`                     |
//! | 2    | only `x1 > u`   | `dF/dx1` at `(x1, u)`         |
//! | 3    | only `x2 > u`   | `dF/dx2` at `(u, x2)`         |
//! | 4    | both `> u`      | `d2F/dx1dx2` at `(x1, x2)`    |
//!
//! with `F` the unit Fréchet Smith CDF. The composite log-likelihood is the
//! weighted sum over station pairs and days.
//!
//! Every contribution depends on `theta = (alpha, beta, gamma)` only through
//! the Mahalanobis separation `a` of the pair, so derivatives are taken in `a`
//! analytically and pushed through `a(theta)` by the chain rule.

use alloc::vec::Vec;

use crate::design::PairTable;
use crate::error::{bail, Result};
use crate::linalg::{Mat3, Vec3};
use crate::math::{exp, ln_std_normal_cdf, ln_std_normal_pdf, log, log_add_exp, sqrt, std_normal_cdf, std_normal_pdf, PairwiseAccumulator};
use crate::maxstable::{PairDependence, SmithParams};
use crate::simulate::{DailyPanel, ThresholdSpec};

/// Log contributions below this are clamped and counted.
pub const LOG_FLOOR: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModelKind {
    #[default]
    Smith,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreMethod {
    #[default]
    FiniteDifference,
    Analytic,
}

#[derive(Debug, Clone, Copy)]
pub struct CensoredConfig<'a> {
    pub threshold: ThresholdSpec,
    pub model: ModelKind,
    pub weights: &'a PairTable,
    pub score_method: ScoreMethod,
}

impl<'a> CensoredConfig<'a> {
    pub fn new(threshold: ThresholdSpec, weights: &'a PairTable) -> Self {
        Self { threshold, model: ModelKind::Smith, weights, score_method: ScoreMethod::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    BothBelow,
    FirstExceeds,
    SecondExceeds,
    BothExceed,
}

impl Case {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn classify(x1: f64, x2: f64, u: f64) -> Self {
        match (x1 > u, x2 > u) {
            (false, false) => Self::BothBelow,
            (true, false) => Self::FirstExceeds,
            (false, true) => Self::SecondExceeds,
            (true, true) => Self::BothExceed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub log: f64,
    pub case: Case,
    pub clamped: bool,
}

/// One censored day for one pair; non-exceeding coordinates hold `u`.
#[derive(Debug, Clone, Copy)]
struct Event {
    case: Case,
    inv1: f64,
    inv2: f64,
    ly1: f64,
    ly2: f64,
}

impl Event {
    fn new(x1: f64, x2: f64, u: f64) -> Self {
        let case = Case::classify(x1, x2, u);
        let y1 = if x1 > u { x1 } else { u };
        let y2 = if x2 > u { x2 } else { u };
        Self { case, inv1: 1.0 / y1, inv2: 1.0 / y2, ly1: log(y1), ly2: log(y2) }
    }

    fn log_value(&self, a: f64) -> f64 {
        let l = self.ly2 - self.ly1;
        let w = 0.5 * a + l / a;
        let v = 0.5 * a - l / a;
        let lpw = ln_std_normal_cdf(w);
        let lpv = ln_std_normal_cdf(v);
        let vv = exp(lpw) * self.inv1 + exp(lpv) * self.inv2;
        match self.case {
            Case::FirstExceeds => -vv + lpw - 2.0 * self.ly1,
            Case::SecondExceeds => -vv + lpv - 2.0 * self.ly2,
            Case::BothExceed => {
                let ln_b = self.ly2 + ln_std_normal_pdf(w) - log(a);
                -vv - 2.0 * (self.ly1 + self.ly2) + log_add_exp(lpw + lpv, ln_b)
            }
            Case::BothBelow => unreachable!("case 1 is aggregated per pair"),
        }
    }

    /// Value and first two derivatives in `a`.
    fn log_derivs(&self, a: f64) -> [f64; 3] {
        let l = self.ly2 - self.ly1;
        let w = 0.5 * a + l / a;
        let v = 0.5 * a - l / a;
        let (dw, dv) = (v / a, w / a);
        let lpw = ln_std_normal_cdf(w);
        let lpv = ln_std_normal_cdf(v);
        let lphi_w = ln_std_normal_pdf(w);
        let vv = exp(lpw) * self.inv1 + exp(lpv) * self.inv2;
        let v1 = exp(lphi_w - self.ly1);
        let v2 = -w * v / a * v1;
        // inverse Mills ratios phi/Phi
        let rw = exp(lphi_w - lpw);
        let rv = exp(ln_std_normal_pdf(v) - lpv);
        let a2 = a * a;
        match self.case {
            Case::FirstExceeds => {
                let d1 = -v1 + rw * dw;
                let d2 = -v2 - rw * (w + rw) * dw * dw + rw * (w - v) / a2;
                [-vv + lpw - 2.0 * self.ly1, d1, d2]
            }
            Case::SecondExceeds => {
                let d1 = -v1 + rv * dv;
                let d2 = -v2 - rv * (v + rv) * dv * dv + rv * (v - w) / a2;
                [-vv + lpv - 2.0 * self.ly2, d1, d2]
            }
            Case::BothExceed => {
                let ln_a = lpw + lpv;
                let ln_b = self.ly2 + lphi_w - log(a);
                let ln_s = log_add_exp(ln_a, ln_b);
                let pa = exp(ln_a - ln_s);
                let pb = exp(ln_b - ln_s);
                let ga = rw * dw + rv * dv;
                let ha = -rw * (w + rw) * dw * dw + rw * (w - v) / a2 - rv * (v + rv) * dv * dv + rv * (v - w) / a2;
                let gb = -(w * v + 1.0) / a;
                let hb = -0.25 - 3.0 * l * l / (a2 * a2) + 1.0 / a2;
                let g = pa * ga + pb * gb;
                let h = pa * (ha + ga * ga) + pb * (hb + gb * gb) - g * g;
                [-vv - 2.0 * (self.ly1 + self.ly2) + ln_s, -v1 + g, -v2 + h]
            }
            Case::BothBelow => unreachable!("case 1 is aggregated per pair"),
        }
    }
}

fn both_below_log(u: f64, a: f64) -> f64 {
    if a == 0.0 {
        -1.0 / u
    } else if a.is_infinite() {
        -2.0 / u
    } else {
        -2.0 * std_normal_cdf(0.5 * a) / u
    }
}

fn clamp(v: f64) -> (f64, bool) {
    if v >= LOG_FLOOR {
        (v, false)
    } else {
        (LOG_FLOOR, true)
    }
}

/// Log contribution of one pair-day.
pub fn pair_contribution(x1: f64, x2: f64, u: f64, a: PairDependence) -> Result<PairTerm> {
    if !(x1 > 0.0 && x2 > 0.0 && u > 0.0) {
        bail!(Domain, "pair contribution needs positive inputs, got ({x1}, {x2}, u={u})");
    }
    let case = Case::classify(x1, x2, u);
    let raw = match case {
        Case::BothBelow => both_below_log(u, a.a),
        _ => Event::new(x1, x2, u).log_value(a.a),
    };
    let (log, clamped) = clamp(raw);
    Ok(PairTerm { log, case, clamped })
}

#[derive(Debug, Clone)]
pub struct PreparedPair {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
    pub sep: [f64; 2],
    n_below: u64,
    events: Vec<Event>,
}

impl PreparedPair {
    pub fn n_events(&self) -> usize {
        self.events.len()
    }

    pub fn a(&self, p: &SmithParams) -> f64 {
        sqrt(p.quad_form_inv(self.sep).max(0.0))
    }

    /// Unweighted log-likelihood of the pair as a function of `a`.
    pub fn log_value(&self, a: f64, u: f64) -> (f64, usize) {
        let mut acc = PairwiseAccumulator::new();
        let mut clamped = 0;
        for e in &self.events {
            let (v, c) = clamp(e.log_value(a));
            clamped += c as usize;
            acc.push(v);
        }
        (self.n_below as f64 * both_below_log(u, a) + acc.sum(), clamped)
    }

    /// Value, first and second derivative in `a` of the unweighted pair log-likelihood.
    pub fn log_derivs(&self, a: f64, u: f64) -> ([f64; 3], usize) {
        let mut acc = [PairwiseAccumulator::new(), PairwiseAccumulator::new(), PairwiseAccumulator::new()];
        let mut clamped = 0;
        for e in &self.events {
            let d = e.log_derivs(a);
            if d[0] >= LOG_FLOOR && d.iter().all(|x| x.is_finite()) {
                for k in 0..3 {
                    acc[k].push(d[k]);
                }
            } else {
                clamped += 1;
                acc[0].push(LOG_FLOOR);
            }
        }
        let nb = self.n_below as f64;
        let phi = std_normal_pdf(0.5 * a);
        let out = [
            nb * both_below_log(u, a) + acc[0].sum(),
            -nb * phi / u + acc[1].sum(),
            nb * 0.25 * a * phi / u + acc[2].sum(),
        ];
        (out, clamped)
    }
}

/// Gradient and Hessian of `a(theta)` for separation `sep`.
pub fn a_derivatives(sep: [f64; 2], p: &SmithParams) -> (f64, Vec3, Mat3) {
    let (dx, dy) = (sep[0], sep[1]);
    let (al, be, ga) = (p.alpha, p.beta, p.gamma);
    let d = al * ga - be * be;
    let n = ga * dx * dx - 2.0 * be * dx * dy + al * dy * dy;
    let q = n / d;
    let a = sqrt(q.max(0.0));
    let dn = [dy * dy, -2.0 * dx * dy, dx * dx];
    let dd = [ga, -2.0 * be, al];
    let mut ddd = [[0.0; 3]; 3];
    ddd[0][2] = 1.0;
    ddd[2][0] = 1.0;
    ddd[1][1] = -2.0;
    let d2 = d * d;
    let mut gq = [0.0; 3];
    for i in 0..3 {
        gq[i] = dn[i] / d - n * dd[i] / d2;
    }
    let mut hq = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            hq[i][j] = -(dn[i] * dd[j] + dn[j] * dd[i] + n * ddd[i][j]) / d2 + 2.0 * n * dd[i] * dd[j] / (d2 * d);
        }
    }
    let mut ga_ = [0.0; 3];
    let mut ha = [[0.0; 3]; 3];
    for i in 0..3 {
        ga_[i] = gq[i] / (2.0 * a);
    }
    for i in 0..3 {
        for j in 0..3 {
            ha[i][j] = hq[i][j] / (2.0 * a) - gq[i] * gq[j] / (4.0 * a * a * a);
        }
    }
    (a, ga_, ha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoglikDerivs {
    pub loglik: f64,
    pub grad: Vec3,
    pub hess: Mat3,
    pub n_clamped: usize,
}

/// Panel reduced to what the censored likelihood needs at a fixed threshold:
/// per weighted pair, the number of both-below days and the list of
/// exceedance days.
#[derive(Debug, Clone)]
pub struct PreparedPanel {
    u: f64,
    days: usize,
    pairs: Vec<PreparedPair>,
    case_counts: [u64; 4],
}

impl PreparedPanel {
    pub fn new(panel: &DailyPanel, config: &CensoredConfig<'_>) -> Result<Self> {
        let u = config.threshold.resolve(panel)?;
        Self::with_threshold(panel, config.weights, u)
    }

    pub fn with_threshold(panel: &DailyPanel, weights: &PairTable, u: f64) -> Result<Self> {
        if !(u > 0.0) {
            bail!(Config, "threshold must be > 0, got {u}");
        }
        let n = panel.n_stations();
        let mut pairs = Vec::new();
        let mut case_counts = [0u64; 4];
        for p in weights.weighted() {
            if p.i >= n || p.j >= n {
                bail!(Config, "pair ({}, {}) out of range for {n} stations", p.i, p.j);
            }
            let mut n_below = 0u64;
            let mut events = Vec::new();
            for d in 0..panel.days() {
                let (x1, x2) = (panel.get(d, p.i), panel.get(d, p.j));
                if x1 <= u && x2 <= u {
                    n_below += 1;
                } else {
                    let e = Event::new(x1, x2, u);
                    case_counts[e.case.index()] += 1;
                    events.push(e);
                }
            }
            case_counts[0] += n_below;
            pairs.push(PreparedPair { i: p.i, j: p.j, weight: p.weight, sep: p.sep, n_below, events });
        }
        if pairs.is_empty() {
            bail!(Config, "no station pair has non-zero weight");
        }
        Ok(Self { u, days: panel.days(), pairs, case_counts })
    }

    pub fn threshold(&self) -> f64 {
        self.u
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn pairs(&self) -> &[PreparedPair] {
        &self.pairs
    }

    pub fn case_counts(&self) -> [u64; 4] {
        self.case_counts
    }

    pub fn loglik(&self, p: &SmithParams) -> Result<(f64, usize)> {
        if !p.is_positive_definite() {
            bail!(Parameter, "Sigma is not positive definite: {p:?}");
        }
        let mut acc = PairwiseAccumulator::new();
        let mut clamped = 0;
        for pair in &self.pairs {
            let (v, c) = pair.log_value(pair.a(p), self.u);
            acc.push(pair.weight * v);
            clamped += c;
        }
        Ok((acc.sum(), clamped))
    }

    /// Log-likelihood with analytic gradient and Hessian in `(alpha, beta, gamma)`.
    pub fn loglik_derivs(&self, p: &SmithParams) -> Result<LoglikDerivs> {
        if !p.is_positive_definite() {
            bail!(Parameter, "Sigma is not positive definite: {p:?}");
        }
        let mut val = PairwiseAccumulator::new();
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        let mut n_clamped = 0;
        for pair in &self.pairs {
            let (a, ga, ha) = a_derivatives(pair.sep, p);
            if !(a > 0.0) {
                bail!(Degenerate, "pair ({}, {}) has zero separation; derivatives are undefined", pair.i, pair.j);
            }
            let ([f, f1, f2], c) = pair.log_derivs(a, self.u);
            n_clamped += c;
            val.push(pair.weight * f);
            for i in 0..3 {
                grad[i] += pair.weight * f1 * ga[i];
                for j in 0..3 {
                    hess[i][j] += pair.weight * (f2 * ga[i] * ga[j] + f1 * ha[i][j]);
                }
            }
        }
        Ok(LoglikDerivs { loglik: val.sum(), grad, hess, n_clamped })
    }
}

/// Chebyshev interpolant of one pair's log-likelihood in `t = log a` on a
/// fixed interval; used to make repeated evaluations during a fit cheap.
#[derive(Debug, Clone)]
struct ChebPair {
    lo: f64,
    hi: f64,
    coef: Vec<f64>,
}

impl ChebPair {
    /// Values at Chebyshev extreme points `cos(pi i / k)`, doubling `k` (which
    /// reuses every earlier node) until the trailing coefficients are negligible.
    fn build(pair: &PreparedPair, u: f64, lo: f64, hi: f64) -> Option<Self> {
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let pi = core::f64::consts::PI;
        let f = |x: f64| pair.log_value(exp(mid + half * x), u).0;
        let mut k = 16usize;
        let mut vals: Vec<f64> = (0..=k).map(|i| f(libm::cos(pi * i as f64 / k as f64))).collect();
        loop {
            let cos_tab: Vec<f64> = (0..2 * k).map(|m| libm::cos(pi * m as f64 / k as f64)).collect();
            let coef: Vec<f64> = (0..=k)
                .map(|j| {
                    let mut s = 0.0;
                    for (i, v) in vals.iter().enumerate() {
                        let w = if i == 0 || i == k { 0.5 } else { 1.0 };
                        s += w * v * cos_tab[i * j % (2 * k)];
                    }
                    let c = 2.0 * s / k as f64;
                    if j == k {
                        0.5 * c
                    } else {
                        c
                    }
                })
                .collect();
            let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if coef[k - 2..].iter().all(|c| c.abs() <= 1e-12 * scale) {
                return Some(Self { lo, hi, coef });
            }
            if k >= 128 {
                return None;
            }
            let mut next = Vec::with_capacity(2 * k + 1);
            for i in 0..=2 * k {
                next.push(if i % 2 == 0 { vals[i / 2] } else { f(libm::cos(pi * i as f64 / (2 * k) as f64)) });
            }
            vals = next;
            k *= 2;
        }
    }

    fn eval(&self, t: f64) -> f64 {
        let x = (2.0 * t - self.lo - self.hi) / (self.hi - self.lo);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coef[1..].iter().rev() {
            let b0 = 2.0 * x * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        x * b1 - b2 + 0.5 * self.coef[0]
    }
}

/// A prepared panel with per-pair interpolants of the log-likelihood in
/// `log a`. Evaluation falls back to the exact sum outside the interpolation
/// range or for pairs whose interpolant failed its accuracy check.
#[derive(Debug, Clone)]
pub struct InterpolatedPanel<'a> {
    prep: &'a PreparedPanel,
    cheb: Vec<Option<ChebPair>>,
}

impl<'a> InterpolatedPanel<'a> {
    /// Interpolants cover `a` in `[a0 / e^width, a0 e^width]` with `a0` the
    /// separation of each pair at `centre`.
    pub fn new(prep: &'a PreparedPanel, centre: &SmithParams, width: f64) -> Result<Self> {
        if !centre.is_positive_definite() {
            bail!(Parameter, "Sigma is not positive definite: {centre:?}");
        }
        let cheb = prep
            .pairs
            .iter()
            .map(|pair| {
                let a0 = pair.a(centre);
                if !(a0 > 0.0) {
                    return None;
                }
                let t0 = log(a0);
                ChebPair::build(pair, prep.u, t0 - width, t0 + width)
            })
            .collect();
        Ok(Self { prep, cheb })
    }

    pub fn loglik(&self, p: &SmithParams) -> Result<f64> {
        if !p.is_positive_definite() {
            bail!(Parameter, "Sigma is not positive definite: {p:?}");
        }
        let mut acc = PairwiseAccumulator::new();
        for (pair, cheb) in self.prep.pairs.iter().zip(&self.cheb) {
            let q = p.quad_form_inv(pair.sep).max(0.0);
            let t = 0.5 * log(q);
            let v = match cheb {
                Some(c) if t >= c.lo && t <= c.hi => c.eval(t),
                _ => pair.log_value(sqrt(q), self.prep.u).0,
            };
            acc.push(pair.weight * v);
        }
        Ok(acc.sum())
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.cheb.iter().map(|c| c.as_ref().map_or(0, |c| c.coef.len() - 1)).collect()
    }

    pub fn n_interpolated(&self) -> usize {
        self.cheb.iter().filter(|c| c.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeEval {
    pub loglik: f64,
    pub score: Vec3,
    pub score_one_sided: bool,
    pub n_pairs_used: usize,
    /// Below-below, exceed-below, below-exceed, exceed-exceed.
    pub case_counts: [u64; 4],
    pub n_clamped: usize,
    pub threshold: f64,
}

pub fn composite_loglik(panel: &DailyPanel, config: &CensoredConfig<'_>, theta: &SmithParams) -> Result<CompositeEval> {
    let prep = PreparedPanel::new(panel, config)?;
    let (loglik, n_clamped) = prep.loglik(theta)?;
    let (score, one_sided) = match config.score_method {
        ScoreMethod::Analytic => (prep.loglik_derivs(theta)?.grad, false),
        ScoreMethod::FiniteDifference => {
            let g = fd_gradient(|x| prep.loglik(&SmithParams::from_array(*x)).map(|r| r.0), theta.as_array(), |x| {
                SmithParams::from_array(*x).is_positive_definite()
            })?;
            (g.grad, g.one_sided)
        }
    };
    Ok(CompositeEval {
        loglik,
        score,
        score_one_sided: one_sided,
        n_pairs_used: prep.pairs.len(),
        case_counts: prep.case_counts,
        n_clamped,
        threshold: prep.u,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreEval {
    pub score: Vec3,
    pub one_sided: bool,
}

pub fn composite_score(panel: &DailyPanel, config: &CensoredConfig<'_>, theta: &SmithParams) -> Result<ScoreEval> {
    let e = composite_loglik(panel, config, theta)?;
    Ok(ScoreEval { score: e.score, one_sided: e.score_one_sided })
}

/// Step used by [`fd_gradient`] for coordinate value `x`.
pub fn fd_step(x: f64) -> f64 {
    (1e-6 * x.abs()).max(1e-6)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGradient {
    pub grad: Vec3,
    pub one_sided: bool,
}

/// Central-difference gradient of `f` with steps [`fd_step`]; falls back to a
/// one-sided difference when a step leaves the region accepted by `valid`.
pub fn fd_gradient<F, V>(mut f: F, x: Vec3, valid: V) -> Result<FdGradient>
where
    F: FnMut(&Vec3) -> Result<f64>,
    V: Fn(&Vec3) -> bool,
{
    let mut grad = [0.0; 3];
    let mut one_sided = false;
    let mut f0 = None;
    for i in 0..3 {
        let h = fd_step(x[i]);
        let (mut xp, mut xm) = (x, x);
        xp[i] += h;
        xm[i] -= h;
        grad[i] = match (valid(&xp), valid(&xm)) {
            (true, true) => (f(&xp)? - f(&xm)?) / (2.0 * h),
            (true, false) => {
                one_sided = true;
                let c = match f0 {
                    Some(v) => v,
                    None => *f0.insert(f(&x)?),
                };
                (f(&xp)? - c) / h
            }
            (false, true) => {
                one_sided = true;
                let c = match f0 {
                    Some(v) => v,
                    None => *f0.insert(f(&x)?),
                };
                (c - f(&xm)?) / h
            }
            (false, false) => bail!(Degenerate, "no valid finite-difference step for coordinate {i} at {x:?}"),
        };
    }
    Ok(FdGradient { grad, one_sided })
}

/// Central second-difference Hessian with relative steps `rel * max(|x_i|, 1)`.
pub fn fd_hessian<F>(mut f: F, x: Vec3, rel: f64) -> Result<Mat3>
where
    F: FnMut(&Vec3) -> Result<f64>,
{
    let h: Vec3 = core::array::from_fn(|i| rel * x[i].abs().max(1.0));
    let f0 = f(&x)?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        let mut xp = x;
        let mut xm = x;
        xp[i] += h[i];
        xm[i] -= h[i];
        out[i][i] = (f(&xp)? - 2.0 * f0 + f(&xm)?) / (h[i] * h[i]);
        for j in 0..i {
            let eval = |si: f64, sj: f64, f: &mut F| {
                let mut y = x;
                y[i] += si * h[i];
                y[j] += sj * h[j];
                f(&y)
            };
            let v = (eval(1.0, 1.0, &mut f)? - eval(1.0, -1.0, &mut f)? - eval(-1.0, 1.0, &mut f)? + eval(-1.0, -1.0, &mut f)?)
                / (4.0 * h[i] * h[j]);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{pair_weights, sample_stations, StationLayout};
    use crate::margins::frechet_quantile;
    use crate::maxstable::{smith_cdf, smith_exponent};
    use crate::simulate::{simulate_daily_panel, PanelSource};
    use alloc::vec;

    fn pd(a: f64) -> PairDependence {
        PairDependence::new(a).unwrap()
    }

    #[test]
    fn case_examples() {
        let t = pair_contribution(3.0, 4.0, 10.0, pd(f64::INFINITY)).unwrap();
        assert_eq!(t.case, Case::BothBelow);
        assert!((t.log + 0.2).abs() < 1e-15);
        let (x1, x2) = (15.0f64, 40.0f64);
        let t = pair_contribution(x1, x2, 10.0, pd(f64::INFINITY)).unwrap();
        let expect = (x1.powi(-2) * (-1.0 / x1).exp()).ln() + (x2.powi(-2) * (-1.0 / x2).exp()).ln();
        assert_eq!(t.case, Case::BothExceed);
        assert!((t.log - expect).abs() < 1e-12);
        let t = pair_contribution(15.0, 3.0, 10.0, pd(200.0)).unwrap();
        let expect = (15f64.powi(-2) * (-1.0 / 15.0 - 0.1f64).exp()).ln();
        assert!((t.log - expect).abs() < 1e-12);
        assert!(pair_contribution(-1.0, 3.0, 10.0, pd(1.0)).is_err());
    }

    #[test]
    fn one_exceedance_matches_cdf_difference() {
        let (x1, u, a) = (25.0, 19.496, 1.0);
        let h = 1e-4;
        let f = |x: f64| smith_cdf(x, u, pd(a)).unwrap();
        let fd = (f(x1 - 2.0 * h) - 8.0 * f(x1 - h) + 8.0 * f(x1 + h) - f(x1 + 2.0 * h)) / (12.0 * h);
        let t = pair_contribution(x1, 3.0, u, pd(a)).unwrap();
        assert_eq!(t.case, Case::FirstExceeds);
        assert!((t.log.exp() - fd).abs() / fd < 1e-5);
        let t2 = pair_contribution(3.0, x1, u, pd(a)).unwrap();
        assert_eq!(t2.case, Case::SecondExceeds);
        assert!((t2.log - t.log).abs() < 1e-13);
    }

    #[test]
    fn both_exceed_matches_exponent_density() {
        for &(x1, x2, u, a) in &[(25.0, 30.0, 19.5, 1.0), (21.0, 400.0, 20.0, 0.3), (50.0, 50.0, 10.0, 2.5)] {
            let e = smith_exponent(x1, x2, pd(a)).unwrap();
            let dens = (-e.v).exp() * (e.v1 * e.v2 - e.v12);
            let t = pair_contribution(x1, x2, u, pd(a)).unwrap();
            assert!((t.log - dens.ln()).abs() < 1e-12 * dens.ln().abs(), "{} {}", t.log, dens.ln());
        }
    }

    #[test]
    fn extreme_separation_is_finite() {
        // huge log ratio over a tiny a would underflow phi and Phi in linear space
        let t = pair_contribution(5000.0, 21.0, 20.0, pd(0.02)).unwrap();
        assert!(t.log.is_finite());
        let t = pair_contribution(1e6, 21.0, 20.0, pd(0.01)).unwrap();
        assert!(t.clamped && t.log == LOG_FLOOR);
    }

    #[test]
    fn a_derivatives_match_differences() {
        let pair = Event::new(35.0, 22.0, 20.0);
        let pair2 = Event::new(35.0, 2.0, 20.0);
        let pair3 = Event::new(3.0, 80.0, 20.0);
        for e in [pair, pair2, pair3] {
            for &a in &[0.2, 0.9, 2.7] {
                let d = e.log_derivs(a);
                let h = 1e-4 * a;
                let f = |x: f64| e.log_value(x);
                let g = |x: f64| e.log_derivs(x)[1];
                let d1 = (f(a - 2.0 * h) - 8.0 * f(a - h) + 8.0 * f(a + h) - f(a + 2.0 * h)) / (12.0 * h);
                let d2 = (g(a - 2.0 * h) - 8.0 * g(a - h) + 8.0 * g(a + h) - g(a + 2.0 * h)) / (12.0 * h);
                assert!((d[0] - e.log_value(a)).abs() < 1e-13 * d[0].abs());
                assert!((d1 - d[1]).abs() < 1e-7 * d[1].abs().max(1e-3), "{:?} a={a}: {d1} vs {}", e.case, d[1]);
                assert!((d2 - d[2]).abs() < 1e-6 * d[2].abs().max(1e-3), "{:?} a={a}: {d2} vs {}", e.case, d[2]);
            }
        }
    }

    #[test]
    fn a_gradient_matches_differences() {
        let p = SmithParams::model_ii();
        let sep = [0.7, -1.3];
        let (_, g, h) = a_derivatives(sep, &p);
        let a_of = |x: &Vec3| Ok(sqrt(SmithParams::from_array(*x).quad_form_inv(sep)));
        let fd = fd_gradient(a_of, p.as_array(), |_| true).unwrap();
        let fh = fd_hessian(a_of, p.as_array(), 1e-4).unwrap();
        for i in 0..3 {
            assert!((fd.grad[i] - g[i]).abs() < 1e-8);
            for j in 0..3 {
                assert!((fh[i][j] - h[i][j]).abs() < 1e-6, "{i}{j}: {} {}", fh[i][j], h[i][j]);
            }
        }
    }

    fn small_panel() -> (StationLayout, PairTable, DailyPanel) {
        let layout = sample_stations(8, 4).unwrap();
        let table = pair_weights(&layout);
        let panel = simulate_daily_panel(&layout, &SmithParams::model_ii(), 400, 100, 5).unwrap();
        (layout, table, panel)
    }

    #[test]
    fn composite_cases_and_linearity() {
        let (_, table, panel) = small_panel();
        let cfg = CensoredConfig::new(ThresholdSpec::Quantile(0.9), &table);
        let theta = SmithParams::model_ii();
        let e = composite_loglik(&panel, &cfg, &theta).unwrap();
        assert_eq!(e.case_counts.iter().sum::<u64>(), 400 * table.n_weighted() as u64);
        let u = e.threshold;
        let mut direct = [0u64; 4];
        for p in table.weighted() {
            for d in 0..panel.days() {
                direct[Case::classify(panel.get(d, p.i), panel.get(d, p.j), u).index()] += 1;
            }
        }
        assert_eq!(direct, e.case_counts);
        let doubled = table.scaled(2.0);
        let cfg2 = CensoredConfig::new(ThresholdSpec::Quantile(0.9), &doubled);
        let e2 = composite_loglik(&panel, &cfg2, &theta).unwrap();
        assert!((e2.loglik - 2.0 * e.loglik).abs() < 1e-10 * e.loglik.abs());
        // raising u never adds case-4 terms
        let hi = CensoredConfig::new(ThresholdSpec::Quantile(0.97), &table);
        assert!(composite_loglik(&panel, &hi, &theta).unwrap().case_counts[3] <= e.case_counts[3]);
    }

    #[test]
    fn single_pair_single_day() {
        let layout = StationLayout::from_sites(vec![[0.0, 0.0], [1000.0, 0.0]], 1.0, 0).unwrap();
        let mut table = crate::design::pair_weights_with_cutoff(&layout, 2000.0);
        assert_eq!(table.pairs.len(), 1);
        table.pairs[0].weight = 1.0;
        let panel = DailyPanel::from_rows(vec![1.0, 2.0], 1, 2, 1, PanelSource::External, 0).unwrap();
        let cfg = CensoredConfig::new(ThresholdSpec::Absolute(10.0), &table);
        let e = composite_loglik(&panel, &cfg, &SmithParams::new(1.0, 0.0, 1.0).unwrap()).unwrap();
        assert!((e.loglik + 0.2).abs() < 1e-15);
    }

    #[test]
    fn analytic_and_fd_scores_agree() {
        let (_, table, panel) = small_panel();
        let theta = SmithParams::new(2.3, 1.2, 2.8).unwrap();
        let mut cfg = CensoredConfig::new(ThresholdSpec::Quantile(0.9), &table);
        let fd = composite_loglik(&panel, &cfg, &theta).unwrap();
        cfg.score_method = ScoreMethod::Analytic;
        let an = composite_loglik(&panel, &cfg, &theta).unwrap();
        assert!(!fd.score_one_sided);
        for i in 0..3 {
            assert!((fd.score[i] - an.score[i]).abs() < 1e-4 * an.score[i].abs().max(1.0), "{:?} {:?}", fd.score, an.score);
        }
        let prep = PreparedPanel::new(&panel, &cfg).unwrap();
        let d = prep.loglik_derivs(&theta).unwrap();
        let fh = fd_hessian(|x| prep.loglik(&SmithParams::from_array(*x)).map(|r| r.0), theta.as_array(), 1e-4).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((fh[i][j] - d.hess[i][j]).abs() < 1e-3 * d.hess[i][j].abs().max(1.0), "{i}{j} {} {}", fh[i][j], d.hess[i][j]);
            }
        }
        // second-order Taylor consistency
        let delta = [1e-4, -1e-4, 1e-4];
        let moved = SmithParams::from_array([2.3 + delta[0], 1.2 + delta[1], 2.8 + delta[2]]);
        let dl = prep.loglik(&moved).unwrap().0 - prep.loglik(&theta).unwrap().0;
        let lin: f64 = (0..3).map(|i| d.grad[i] * delta[i]).sum();
        let quad: f64 = (0..3).map(|i| (0..3).map(|j| 0.5 * delta[i] * d.hess[i][j] * delta[j]).sum::<f64>()).sum();
        assert!((dl - lin - quad).abs() < 1e-2 * quad.abs(), "{dl} {lin} {quad}");
    }

    #[test]
    fn interpolated_panel_matches_exact() {
        let (_, table, panel) = small_panel();
        let cfg = CensoredConfig::new(ThresholdSpec::Quantile(0.9), &table);
        let prep = PreparedPanel::new(&panel, &cfg).unwrap();
        let centre = SmithParams::new(2.5, 0.0, 2.5).unwrap();
        let interp = InterpolatedPanel::new(&prep, &centre, 2.0).unwrap();
        assert_eq!(interp.n_interpolated(), prep.pairs().len());
        for p in [centre, SmithParams::model_ii(), SmithParams::new(0.4, -0.1, 9.0).unwrap(), SmithParams::new(1e3, 0.0, 1e3).unwrap()] {
            let exact = prep.loglik(&p).unwrap().0;
            let fast = interp.loglik(&p).unwrap();
            assert!((exact - fast).abs() < 1e-9 * exact.abs(), "{p:?}: {exact} vs {fast}");
        }
    }

    #[test]
    fn fd_gradient_on_quadratic() {
        let c = [[3.0, 1.0, 0.5], [1.0, 2.0, -0.3], [0.5, -0.3, 4.0]];
        let b = [0.4, -1.0, 2.0];
        let f = |x: &Vec3| -> Result<f64> {
            let mut s = 0.0;
            for i in 0..3 {
                s += b[i] * x[i];
                for j in 0..3 {
                    s += 0.5 * c[i][j] * x[i] * x[j];
                }
            }
            Ok(s)
        };
        let x = [1.5, -0.7, 2.2];
        let g = fd_gradient(f, x, |_| true).unwrap();
        for i in 0..3 {
            let exact: f64 = b[i] + (0..3).map(|j| c[i][j] * x[j]).sum::<f64>();
            assert!((g.grad[i] - exact).abs() < 1e-9);
        }
        let one = fd_gradient(f, x, |y| y[0] <= x[0]).unwrap();
        assert!(one.one_sided);
    }

    #[test]
    fn relabeled_panel_has_same_score() {
        let (layout, table, panel) = small_panel();
        let perm: Vec<usize> = vec![3, 1, 7, 0, 2, 6, 5, 4];
        let table_p = pair_weights(&layout.permuted(&perm));
        let panel_p = panel.permuted(&perm);
        let theta = SmithParams::model_ii();
        let u = frechet_quantile(0.9).unwrap();
        let mut c1 = CensoredConfig::new(ThresholdSpec::Absolute(u), &table);
        let mut c2 = CensoredConfig::new(ThresholdSpec::Absolute(u), &table_p);
        c1.score_method = ScoreMethod::Analytic;
        c2.score_method = ScoreMethod::Analytic;
        let a = composite_loglik(&panel, &c1, &theta).unwrap();
        let b = composite_loglik(&panel_p, &c2, &theta).unwrap();
        assert!((a.loglik - b.loglik).abs() < 1e-9 * a.loglik.abs());
        for i in 0..3 {
            assert!((a.score[i] - b.score[i]).abs() < 1e-8 * a.score[i].abs().max(1.0));
        }
    }
}
