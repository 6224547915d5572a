//! Stochastic sampling design under increasing-domain asymptotics.
//!
//! Sites are drawn uniformly on `R0 = (-1/2, 1/2]^2` and inflated by
//! `lambda_n = sqrt(n)`. Pairs within half the diagonal of the inflated square
//! get weight one.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math::sqrt;
use crate::rng::{derive_seed, substream, uniform01};

const STATION_STREAM: u64 = 0x5354_4154;

#[derive(Debug, Clone, PartialEq)]
pub struct StationLayout {
    pub n: usize,
    pub lambda_n: f64,
    /// Scaled coordinates `s_i = lambda_n * x_i`.
    pub sites: Vec<[f64; 2]>,
    pub seed: u64,
}

impl StationLayout {
    /// Layout from explicit scaled coordinates (used for file input and tests).
    pub fn from_sites(sites: Vec<[f64; 2]>, lambda_n: f64, seed: u64) -> Result<Self> {
        if sites.len() < 2 {
            bail!(Config, "need at least 2 stations, got {}", sites.len());
        }
        if !(lambda_n > 0.0) {
            bail!(Config, "inflation factor must be > 0, got {lambda_n}");
        }
        if sites.iter().any(|s| !s[0].is_finite() || !s[1].is_finite()) {
            bail!(Data, "station coordinates must be finite");
        }
        Ok(Self { n: sites.len(), lambda_n, sites, seed })
    }

    /// Same layout with stations reordered so that new station `k` is old station `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            n: self.n,
            lambda_n: self.lambda_n,
            sites: perm.iter().map(|&k| self.sites[k]).collect(),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationPair {
    pub i: usize,
    pub j: usize,
    /// Separation vector `s_i - s_j`.
    pub sep: [f64; 2],
    pub h: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTable {
    pub pairs: Vec<StationPair>,
    pub delta0: f64,
}

impl PairTable {
    pub fn weighted(&self) -> impl Iterator<Item = &StationPair> + '_ {
        self.pairs.iter().filter(|p| p.weight != 0.0)
    }

    pub fn n_weighted(&self) -> usize {
        self.weighted().count()
    }

    /// Multiply every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pairs {
            p.weight *= factor;
        }
        out
    }
}

pub fn sample_stations(n: usize, seed: u64) -> Result<StationLayout> {
    if n < 2 {
        bail!(Config, "need at least 2 stations, got {n}");
    }
    let lambda_n = sqrt(n as f64);
    let mut rng = substream(derive_seed(seed, STATION_STREAM), 0);
    let sites = (0..n)
        .map(|_| {
            // uniform01 is in [0, 1), so 1/2 - u lies in (-1/2, 1/2]
            let x = 0.5 - uniform01(&mut rng);
            let y = 0.5 - uniform01(&mut rng);
            [lambda_n * x, lambda_n * y]
        })
        .collect();
    Ok(StationLayout { n, lambda_n, sites, seed })
}

/// Half diagonal of the inflated square `sqrt(n) R0`.
pub fn default_delta0(n: usize) -> f64 {
    0.5 * sqrt(2.0 * n as f64)
}

pub fn pair_weights(layout: &StationLayout) -> PairTable {
    pair_weights_with_cutoff(layout, default_delta0(layout.n))
}

pub fn pair_weights_with_cutoff(layout: &StationLayout, delta0: f64) -> PairTable {
    let n = layout.sites.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (layout.sites[i], layout.sites[j]);
            let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
            let h = sqrt(dx * dx + dy * dy);
            pairs.push(StationPair { i, j, sep: [dx, dy], h, weight: if h <= delta0 { 1.0 } else { 0.0 } });
        }
    }
    PairTable { pairs, delta0 }
}
