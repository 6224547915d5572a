//! Simulation of the Smith (Gaussian extreme value) process, daily panels,
//! thresholds and annual maxima.
//!
//! Fields are built from the storm representation `Y(s) = max_k zeta_k
//! phi_Sigma(s - U_k)`: storm centres are uniform on the inflated square
//! extended by a margin `r = c sqrt(lambda_max(Sigma))` and the intensities
//! `zeta_k = |A| / Gamma_k` come from the arrival times of a unit-rate Poisson
//! process. Storms arrive in decreasing intensity, so the loop stops once
//! `zeta_k phi_Sigma(0)` drops below the smallest station value.

use alloc::vec;
use alloc::vec::Vec;

use crate::design::StationLayout;
use crate::error::{bail, Result};
use crate::exec::{Executor, Sequential};
use crate::math::{exp, sqrt};
use crate::maxstable::SmithParams;
use crate::rng::{exp1, substream, uniform01, StreamRng};

/// Default margin multiplier `c` in `r = c sqrt(lambda_max(Sigma))`.
pub const DEFAULT_MARGIN: f64 = 6.0;

/// Hard cap on storms per field; reaching it means the stopping rule failed.
const MAX_STORMS: usize = 50_000_000;

#[derive(Debug, Clone)]
pub struct SmithSimulator {
    sites: Vec<[f64; 2]>,
    params: SmithParams,
    inv: [f64; 3],
    peak: f64,
    lo: [f64; 2],
    width: [f64; 2],
    area: f64,
    /// Inner box used by the coupled simulation, if any.
    inner: Option<([f64; 2], [f64; 2])>,
}

impl SmithSimulator {
    pub fn new(layout: &StationLayout, params: &SmithParams) -> Result<Self> {
        Self::with_margin(layout, params, DEFAULT_MARGIN)
    }

    pub fn with_margin(layout: &StationLayout, params: &SmithParams, margin: f64) -> Result<Self> {
        if !params.is_positive_definite() {
            bail!(Parameter, "Sigma is not positive definite: {params:?}");
        }
        if !(margin > 0.0) {
            bail!(Config, "storm margin multiplier must be > 0, got {margin}");
        }
        let det = params.det();
        let r = margin * sqrt(params.largest_eigenvalue());
        let half = 0.5 * layout.lambda_n;
        let (mut lo, mut hi) = ([-half, -half], [half, half]);
        // cover stations given explicitly outside the nominal square
        for s in &layout.sites {
            for k in 0..2 {
                lo[k] = lo[k].min(s[k]);
                hi[k] = hi[k].max(s[k]);
            }
        }
        let lo = [lo[0] - r, lo[1] - r];
        let width = [hi[0] - lo[0] + r, hi[1] - lo[1] + r];
        Ok(Self {
            sites: layout.sites.clone(),
            params: *params,
            inv: [params.gamma / det, -params.beta / det, params.alpha / det],
            peak: 1.0 / (2.0 * core::f64::consts::PI * sqrt(det)),
            lo,
            width,
            area: width[0] * width[1],
            inner: None,
        })
    }

    pub fn params(&self) -> &SmithParams {
        &self.params
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    fn profile(&self, s: [f64; 2], u: [f64; 2]) -> f64 {
        let (dx, dy) = (s[0] - u[0], s[1] - u[1]);
        let q = self.inv[0] * dx * dx + 2.0 * self.inv[1] * dx * dy + self.inv[2] * dy * dy;
        self.peak * exp(-0.5 * q)
    }

    /// One field realisation, written into `out`.
    pub fn field_into(&self, rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        let mut scratch = vec![0.0; out.len()];
        self.run(rng, out, &mut scratch, false)
    }

    pub fn field(&self, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.sites.len()];
        self.field_into(rng, &mut out)?;
        Ok(out)
    }

    fn run(&self, rng: &mut StreamRng, out: &mut [f64], inner_out: &mut [f64], coupled: bool) -> Result<()> {
        debug_assert_eq!(out.len(), self.sites.len());
        out.iter_mut().for_each(|v| *v = 0.0);
        inner_out.iter_mut().for_each(|v| *v = 0.0);
        let mut gamma = 0.0;
        let mut min_y: f64 = 0.0;
        for _ in 0..MAX_STORMS {
            gamma += exp1(rng);
            let zeta = self.area / gamma;
            let stop_level = if coupled { min_y.min(min_of(inner_out)) } else { min_y };
            if zeta * self.peak < stop_level {
                return Ok(());
            }
            let u = [self.lo[0] + self.width[0] * uniform01(rng), self.lo[1] + self.width[1] * uniform01(rng)];
            let in_inner = match (coupled, &self.inner) {
                (true, Some((ilo, ihi))) => u[0] >= ilo[0] && u[0] < ihi[0] && u[1] >= ilo[1] && u[1] < ihi[1],
                _ => false,
            };
            let mut changed = false;
            for (k, s) in self.sites.iter().enumerate() {
                let v = zeta * self.profile(*s, u);
                if v > out[k] {
                    out[k] = v;
                    changed = true;
                }
                if in_inner && v > inner_out[k] {
                    inner_out[k] = v;
                }
            }
            if changed {
                min_y = min_of(out);
            }
        }
        bail!(Degenerate, "storm loop did not terminate within {MAX_STORMS} storms")
    }
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// One Smith field at the layout's stations.
pub fn simulate_smith_field(layout: &StationLayout, p: &SmithParams, seed: u64) -> Result<Vec<f64>> {
    let sim = SmithSimulator::new(layout, p)?;
    sim.field(&mut substream(seed, 0))
}

/// Two fields sharing one Poisson process: storms on the region with margin
/// `2c` (second) and the same storms restricted to margin `c` (first).
///
/// Both are exact-up-to-truncation realisations; their difference measures
/// the truncation error of the margin `c`.
pub fn simulate_smith_field_coupled(
    layout: &StationLayout,
    p: &SmithParams,
    seed: u64,
    margin: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let inner = SmithSimulator::with_margin(layout, p, margin)?;
    let mut outer = SmithSimulator::with_margin(layout, p, 2.0 * margin)?;
    outer.inner = Some((inner.lo, [inner.lo[0] + inner.width[0], inner.lo[1] + inner.width[1]]));
    let n = layout.sites.len();
    let (mut big, mut small) = (vec![0.0; n], vec![0.0; n]);
    outer.run(&mut substream(seed, 0), &mut big, &mut small, true)?;
    Ok((small, big))
}

/// Which model produced a panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PanelSource {
    Smith(SmithParams),
    External,
}

/// `T x n` daily observations on the unit Fréchet scale, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyPanel {
    data: Vec<f64>,
    days: usize,
    n: usize,
    m: usize,
    pub source: PanelSource,
    pub seed: u64,
}

impl DailyPanel {
    pub fn from_rows(data: Vec<f64>, days: usize, n: usize, m: usize, source: PanelSource, seed: u64) -> Result<Self> {
        if days == 0 || n == 0 || data.len() != days * n {
            bail!(Data, "panel shape mismatch: {} values for {days} x {n}", data.len());
        }
        if m == 0 {
            bail!(Config, "days per year must be >= 1");
        }
        if let Some(v) = data.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            bail!(Data, "panel entries must be finite and > 0, found {v}");
        }
        Ok(Self { data, days, n, m, source, seed })
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn n_stations(&self) -> usize {
        self.n
    }

    pub fn days_per_year(&self) -> usize {
        self.m
    }

    pub fn get(&self, day: usize, station: usize) -> f64 {
        self.data[day * self.n + station]
    }

    pub fn row(&self, day: usize) -> &[f64] {
        &self.data[day * self.n..(day + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, station: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.days).map(move |d| self.get(d, station))
    }

    /// Panel with stations reordered so new station `k` is old station `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for d in 0..self.days {
            let row = self.row(d);
            data.extend(perm.iter().map(|&k| row[k]));
        }
        Self { data, ..self.clone() }
    }

    /// First `days` rows.
    pub fn truncated(&self, days: usize) -> Result<Self> {
        if days == 0 || days > self.days {
            bail!(Config, "cannot truncate a {}-day panel to {days} days", self.days);
        }
        Ok(Self { data: self.data[..days * self.n].to_vec(), days, ..self.clone() })
    }
}

pub fn simulate_daily_panel(layout: &StationLayout, p: &SmithParams, days: usize, m: usize, seed: u64) -> Result<DailyPanel> {
    simulate_daily_panel_with(&Sequential, layout, p, days, m, seed)
}

/// Daily panel where day `d` uses stream `(seed, d)`; the result does not
/// depend on the executor.
pub fn simulate_daily_panel_with<E: Executor>(
    exec: &E,
    layout: &StationLayout,
    p: &SmithParams,
    days: usize,
    m: usize,
    seed: u64,
) -> Result<DailyPanel> {
    if days == 0 {
        bail!(Config, "need at least one day");
    }
    if m == 0 {
        bail!(Config, "days per year must be >= 1");
    }
    let sim = SmithSimulator::new(layout, p)?;
    let rows = exec.map(days, |d| sim.field(&mut substream(seed, d as u64)));
    let n = layout.sites.len();
    let mut data = Vec::with_capacity(days * n);
    for r in rows {
        data.extend(r?);
    }
    Ok(DailyPanel { data, days, n, m, source: PanelSource::Smith(*p), seed })
}

/// How the censoring threshold is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    /// Pooled empirical quantile level in (0, 1).
    Quantile(f64),
    /// Target number `N` of pooled exceedances.
    ExceedanceCount(usize),
    /// Threshold `u` on the unit Fréchet scale.
    Absolute(f64),
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Quantile(q) if !(q > 0.0 && q < 1.0) => bail!(Config, "threshold quantile must be in (0, 1), got {q}"),
            Self::ExceedanceCount(0) => bail!(Config, "exceedance count must be >= 1"),
            Self::Absolute(u) if !(u > 0.0) || !u.is_finite() => bail!(Config, "absolute threshold must be > 0, got {u}"),
            _ => Ok(()),
        }
    }

    /// Absolute threshold on `panel`.
    pub fn resolve(&self, panel: &DailyPanel) -> Result<f64> {
        self.validate()?;
        match *self {
            Self::Absolute(u) => Ok(u),
            Self::ExceedanceCount(n) => threshold_for_count(panel, n),
            Self::Quantile(q) => {
                let total = panel.values().len();
                let n = libm::round((1.0 - q) * total as f64) as usize;
                if n == 0 {
                    bail!(Config, "quantile {q} leaves no exceedances among {total} values");
                }
                threshold_for_count(panel, n.min(total - 1))
            }
        }
    }
}

/// The `(T n - N)`-th order statistic of the pooled panel, so that exactly
/// `N` entries exceed it when there are no ties (ties give fewer).
pub fn threshold_for_count(panel: &DailyPanel, n_exceed: usize) -> Result<f64> {
    let total = panel.values().len();
    if n_exceed == 0 || n_exceed >= total {
        bail!(Config, "exceedance count must be in [1, {total}), got {n_exceed}");
    }
    let mut sorted = panel.values().to_vec();
    let k = total - n_exceed - 1;
    let (_, u, _) = sorted.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
    Ok(*u)
}

/// Number of pooled entries strictly above `u`.
pub fn count_exceedances(panel: &DailyPanel, u: f64) -> usize {
    panel.values().iter().filter(|&&v| v > u).count()
}

/// Block maxima over consecutive `M`-day blocks, one row per year.
pub fn annual_maxima(panel: &DailyPanel) -> Result<Vec<Vec<f64>>> {
    let m = panel.m;
    if panel.days % m != 0 {
        bail!(Config, "days per year M = {m} does not divide T = {}", panel.days);
    }
    let years = panel.days / m;
    let mut out = Vec::with_capacity(years);
    for y in 0..years {
        let mut row = panel.row(y * m).to_vec();
        for d in y * m + 1..(y + 1) * m {
            for (r, v) in row.iter_mut().zip(panel.row(d)) {
                *r = r.max(*v);
            }
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::sample_stations;
    use crate::margins::{frechet_quantile, unit_frechet_cdf};
    use crate::maxstable::{mahalanobis_a, smith_cdf};

    fn ks_unit_frechet(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(|a, b| a.total_cmp(b));
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = unit_frechet_cdf(x);
                (f - i as f64 / n).max((i + 1) as f64 / n - f)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn margins_are_unit_frechet() {
        let layout = sample_stations(20, 1).unwrap();
        let sim = SmithSimulator::new(&layout, &SmithParams::model_i()).unwrap();
        let m = 4000;
        let xs: Vec<f64> = (0..m).map(|i| sim.field(&mut substream(9, i)).unwrap()[3]).collect();
        assert!(ks_unit_frechet(xs) < 1.63 / (m as f64).sqrt());
    }

    #[test]
    fn pair_probability_matches_smith_cdf() {
        let layout = sample_stations(6, 2).unwrap();
        let p = SmithParams::model_ii();
        let sim = SmithSimulator::new(&layout, &p).unwrap();
        let m = 4000;
        let fields: Vec<Vec<f64>> = (0..m).map(|i| sim.field(&mut substream(4, i)).unwrap()).collect();
        for &(i, j) in &[(0usize, 1usize), (2, 5)] {
            let a = mahalanobis_a(layout.sites[i], layout.sites[j], &p).unwrap();
            let expect = smith_cdf(1.0, 1.0, a).unwrap();
            let hits = fields.iter().filter(|f| f[i] <= 1.0 && f[j] <= 1.0).count() as f64 / m as f64;
            let se = (expect * (1.0 - expect) / m as f64).sqrt();
            assert!((hits - expect).abs() < 3.0 * se, "pair ({i},{j}): {hits} vs {expect}");
        }
    }

    #[test]
    fn coincident_stations_share_values() {
        let layout = StationLayout::from_sites(vec![[0.5, -0.2], [0.5, -0.2], [1.0, 1.0]], 2.0, 0).unwrap();
        for seed in 0..50 {
            let f = simulate_smith_field(&layout, &SmithParams::model_i(), seed).unwrap();
            assert_eq!(f[0], f[1]);
            assert!(f.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn truncation_margin_is_negligible() {
        let layout = sample_stations(20, 3).unwrap();
        for seed in 0..200 {
            let (small, big) = simulate_smith_field_coupled(&layout, &SmithParams::model_ii(), seed, DEFAULT_MARGIN).unwrap();
            for (a, b) in small.iter().zip(&big) {
                assert!((a - b).abs() <= 1e-6 * b, "seed {seed}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn panel_shape_determinism_and_exceedance_rate() {
        let layout = sample_stations(20, 5).unwrap();
        let p = SmithParams::model_i();
        let panel = simulate_daily_panel(&layout, &p, 1000, 100, 17).unwrap();
        assert_eq!((panel.days(), panel.n_stations()), (1000, 20));
        assert!(panel.values().iter().all(|v| *v > 0.0));
        assert_eq!(panel, simulate_daily_panel(&layout, &p, 1000, 100, 17).unwrap());
        let q95 = frechet_quantile(0.95).unwrap();
        let frac = count_exceedances(&panel, q95) as f64 / 20_000.0;
        // entries within a day are dependent, so allow a generous band
        assert!((frac - 0.05).abs() < 0.01, "frac={frac}");
        let u = threshold_for_count(&panel, 1000).unwrap();
        assert_eq!(count_exceedances(&panel, u), 1000);
        assert!((u - q95).abs() < 3.0);
    }

    #[test]
    fn thresholds() {
        let data: Vec<f64> = (1..=20).map(|v| v as f64).collect();
        let panel = DailyPanel::from_rows(data, 5, 4, 1, PanelSource::External, 0).unwrap();
        assert_eq!(threshold_for_count(&panel, 19).unwrap(), 1.0);
        assert_eq!(threshold_for_count(&panel, 3).unwrap(), 17.0);
        assert!(threshold_for_count(&panel, 20).is_err());
        assert!(threshold_for_count(&panel, 0).is_err());
        let mut prev = f64::INFINITY;
        for n in 1..20 {
            let u = threshold_for_count(&panel, n).unwrap();
            assert_eq!(count_exceedances(&panel, u), n);
            assert!(u <= prev);
            prev = u;
        }
        assert_eq!(ThresholdSpec::Quantile(0.9).resolve(&panel).unwrap(), 18.0);
        assert_eq!(ThresholdSpec::Absolute(2.5).resolve(&panel).unwrap(), 2.5);
        assert!(ThresholdSpec::Quantile(1.0).resolve(&panel).is_err());
        let ties = DailyPanel::from_rows(vec![1.0, 2.0, 2.0, 2.0], 2, 2, 1, PanelSource::External, 0).unwrap();
        let u = threshold_for_count(&ties, 2).unwrap();
        assert!(count_exceedances(&ties, u) <= 2);
    }

    #[test]
    fn annual_maxima_shapes() {
        let layout = sample_stations(4, 5).unwrap();
        let panel = simulate_daily_panel(&layout, &SmithParams::model_i(), 1000, 100, 1).unwrap();
        let am = annual_maxima(&panel).unwrap();
        assert_eq!((am.len(), am[0].len()), (10, 4));
        let ident = simulate_daily_panel(&layout, &SmithParams::model_i(), 7, 1, 1).unwrap();
        let am1 = annual_maxima(&ident).unwrap();
        for d in 0..7 {
            assert_eq!(am1[d], ident.row(d));
        }
        let odd = simulate_daily_panel(&layout, &SmithParams::model_i(), 10, 3, 1).unwrap();
        assert!(annual_maxima(&odd).is_err());
    }
}
