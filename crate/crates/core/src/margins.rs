//! Univariate extreme-value margins: GEV, unit Fréchet, GPD and the Gumbel
//! change of scale.

use crate::error::{bail, Result};
use crate::math::{exp, log, log1p, pow};

pub use crate::math::{std_normal_cdf, std_normal_pdf};

/// Shape values closer to zero than this use the Gumbel / exponential limit.
pub const XI_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GevParams {
    mu: f64,
    sigma: f64,
    xi: f64,
}

impl GevParams {
    pub fn new(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(sigma > 0.0) || !mu.is_finite() || !xi.is_finite() || !sigma.is_finite() {
            bail!(Parameter, "GEV needs finite mu, xi and sigma > 0 (got mu={mu}, sigma={sigma}, xi={xi})");
        }
        Ok(Self { mu, sigma, xi })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Finite end of the support, if any: lower endpoint for xi > 0, upper for xi < 0.
    pub fn support_endpoint(&self) -> Option<f64> {
        if self.xi.abs() < XI_LIMIT {
            None
        } else {
            Some(self.mu - self.sigma / self.xi)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdParams {
    sigma_u: f64,
    xi: f64,
}

impl GpdParams {
    pub fn new(sigma_u: f64, xi: f64) -> Result<Self> {
        if !(sigma_u > 0.0) || !sigma_u.is_finite() || !xi.is_finite() {
            bail!(Parameter, "GPD needs sigma_u > 0 and finite xi (got sigma_u={sigma_u}, xi={xi})");
        }
        Ok(Self { sigma_u, xi })
    }
    pub fn sigma_u(&self) -> f64 {
        self.sigma_u
    }
    pub fn xi(&self) -> f64 {
        self.xi
    }
}

fn finite(x: f64) -> Result<()> {
    if !x.is_finite() {
        bail!(Domain, "argument must be finite, got {x}");
    }
    Ok(())
}

pub fn gev_cdf(x: f64, p: &GevParams) -> Result<f64> {
    finite(x)?;
    let z = (x - p.mu) / p.sigma;
    if p.xi.abs() < XI_LIMIT {
        return Ok(exp(-exp(-z)));
    }
    let base = 1.0 + p.xi * z;
    if base <= 0.0 {
        // below the lower endpoint (xi > 0) or above the upper one (xi < 0)
        return Ok(if p.xi > 0.0 { 0.0 } else { 1.0 });
    }
    Ok(exp(-pow(base, -1.0 / p.xi)))
}

pub fn gev_pdf(x: f64, p: &GevParams) -> Result<f64> {
    finite(x)?;
    let z = (x - p.mu) / p.sigma;
    if p.xi.abs() < XI_LIMIT {
        let e = exp(-z);
        return Ok(e * exp(-e) / p.sigma);
    }
    let base = 1.0 + p.xi * z;
    if base <= 0.0 {
        return Ok(0.0);
    }
    let tz = pow(base, -1.0 / p.xi);
    Ok(tz * exp(-tz) / (p.sigma * base))
}

pub fn unit_frechet_cdf(z: f64) -> f64 {
    if z > 0.0 {
        exp(-1.0 / z)
    } else {
        0.0
    }
}

pub fn unit_frechet_pdf(z: f64) -> f64 {
    if z > 0.0 {
        exp(-1.0 / z) / (z * z)
    } else {
        0.0
    }
}

pub fn frechet_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        bail!(Domain, "probability must lie in (0,1), got {p}");
    }
    Ok(-1.0 / log(p))
}

pub fn gpd_cdf(y: f64, p: &GpdParams) -> Result<f64> {
    if !(y >= 0.0) {
        bail!(Domain, "GPD argument must be >= 0, got {y}");
    }
    let z = y / p.sigma_u;
    if p.xi.abs() < XI_LIMIT {
        return Ok(-crate::math::expm1(-z));
    }
    let base = 1.0 + p.xi * z;
    if base <= 0.0 {
        return Ok(1.0);
    }
    Ok(-crate::math::expm1(-log1p(p.xi * z) / p.xi))
}

pub fn gpd_pdf(y: f64, p: &GpdParams) -> Result<f64> {
    if !(y >= 0.0) {
        bail!(Domain, "GPD argument must be >= 0, got {y}");
    }
    let z = y / p.sigma_u;
    if p.xi.abs() < XI_LIMIT {
        return Ok(exp(-z) / p.sigma_u);
    }
    let base = 1.0 + p.xi * z;
    if base <= 0.0 {
        return Ok(0.0);
    }
    Ok(pow(base, -1.0 / p.xi - 1.0) / p.sigma_u)
}

/// Maps a unit Fréchet variable to the standard Gumbel scale.
pub fn gumbel_from_frechet(z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        bail!(Domain, "Fréchet value must be positive and finite, got {z}");
    }
    Ok(log(z))
}
