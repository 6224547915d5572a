//! Bivariate max-stable dependence models.
//!
//! All models are on unit Fréchet margins and written through the exponent
//! measure `V`, with `F(y1, y2) = exp(-V(y1, y2))`.

use crate::error::{bail, Result};
use crate::math::{exp, log, sqrt, std_normal_cdf, std_normal_pdf, std_normal_sf};

/// Covariance matrix `[[alpha, beta], [beta, gamma]]` of the Smith storm profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmithParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl SmithParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self { alpha, beta, gamma };
        if !p.is_positive_definite() {
            bail!(Parameter, "Sigma must be positive definite (alpha={alpha}, beta={beta}, gamma={gamma})");
        }
        Ok(p)
    }

    /// Model (i): alpha = 2, beta = 0, gamma = 3.
    pub fn model_i() -> Self {
        Self { alpha: 2.0, beta: 0.0, gamma: 3.0 }
    }

    /// Model (ii): alpha = 2, beta = 1.5, gamma = 3.
    pub fn model_ii() -> Self {
        Self { alpha: 2.0, beta: 1.5, gamma: 3.0 }
    }

    pub fn is_positive_definite(&self) -> bool {
        self.alpha.is_finite()
            && self.beta.is_finite()
            && self.gamma.is_finite()
            && self.alpha > 0.0
            && self.gamma > 0.0
            && self.det() > 0.0
    }

    pub fn det(&self) -> f64 {
        self.alpha * self.gamma - self.beta * self.beta
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn from_array(v: [f64; 3]) -> Self {
        Self { alpha: v[0], beta: v[1], gamma: v[2] }
    }

    pub fn largest_eigenvalue(&self) -> f64 {
        let half_tr = 0.5 * (self.alpha + self.gamma);
        let diff = 0.5 * (self.alpha - self.gamma);
        half_tr + sqrt(diff * diff + self.beta * self.beta)
    }

    /// Squared Mahalanobis length `d' Sigma^-1 d` of a separation vector.
    pub fn quad_form_inv(&self, d: [f64; 2]) -> f64 {
        (self.gamma * d[0] * d[0] - 2.0 * self.beta * d[0] * d[1] + self.alpha * d[1] * d[1]) / self.det()
    }
}

/// Mahalanobis separation `a` of a station pair.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PairDependence {
    pub a: f64,
}

impl PairDependence {
    pub fn new(a: f64) -> Result<Self> {
        if !(a >= 0.0) {
            bail!(Parameter, "Mahalanobis separation must be >= 0, got {a}");
        }
        Ok(Self { a })
    }
}

pub fn mahalanobis_a(s1: [f64; 2], s2: [f64; 2], p: &SmithParams) -> Result<PairDependence> {
    if !p.is_positive_definite() {
        bail!(Parameter, "Sigma is not positive definite: {p:?}");
    }
    let d = [s1[0] - s2[0], s1[1] - s2[1]];
    Ok(PairDependence { a: sqrt(p.quad_form_inv(d).max(0.0)) })
}

/// Exponent measure and its partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentMeasureEval {
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    pub v12: f64,
}

fn check_positive(y1: f64, y2: f64) -> Result<()> {
    if !(y1 > 0.0 && y2 > 0.0) {
        bail!(Domain, "bivariate arguments must be positive, got ({y1}, {y2})");
    }
    Ok(())
}

pub fn smith_cdf(y1: f64, y2: f64, a: PairDependence) -> Result<f64> {
    check_positive(y1, y2)?;
    let a = a.a;
    if a == 0.0 {
        return Ok(exp(-(1.0 / y1).max(1.0 / y2)));
    }
    if a.is_infinite() {
        return Ok(exp(-1.0 / y1 - 1.0 / y2));
    }
    let l = log(y2 / y1) / a;
    let w = 0.5 * a + l;
    let v = 0.5 * a - l;
    Ok(exp(-std_normal_cdf(w) / y1 - std_normal_cdf(v) / y2))
}

/// Smith exponent measure with analytic partials.
///
/// With `w = a/2 + log(y2/y1)/a` and `v = a - w`, the identity
/// `phi(w)/y1 = phi(v)/y2` collapses the partials to
/// `V1 = -Phi(w)/y1^2`, `V2 = -Phi(v)/y2^2` and `V12 = -phi(w)/(a y1^2 y2)`.
pub fn smith_exponent(y1: f64, y2: f64, a: PairDependence) -> Result<ExponentMeasureEval> {
    check_positive(y1, y2)?;
    let a = a.a;
    if a == 0.0 {
        bail!(Degenerate, "a = 0 is complete dependence; V is not differentiable there");
    }
    if a.is_infinite() {
        return Ok(ExponentMeasureEval {
            v: 1.0 / y1 + 1.0 / y2,
            v1: -1.0 / (y1 * y1),
            v2: -1.0 / (y2 * y2),
            v12: 0.0,
        });
    }
    let l = log(y2 / y1) / a;
    let w = 0.5 * a + l;
    let v = 0.5 * a - l;
    // unsaturated tails keep v1, v2 relatively accurate far from the diagonal
    let pw = std_normal_sf(-w);
    let pv = std_normal_sf(-v);
    Ok(ExponentMeasureEval {
        v: pw / y1 + pv / y2,
        v1: -pw / (y1 * y1),
        v2: -pv / (y2 * y2),
        v12: -std_normal_pdf(w) / (a * y1 * y1 * y2),
    })
}

pub fn schlather_cdf(y1: f64, y2: f64, rho: f64) -> Result<f64> {
    check_positive(y1, y2)?;
    if !(-1.0..=1.0).contains(&rho) {
        bail!(Parameter, "correlation must lie in [-1, 1], got {rho}");
    }
    let s = y1 + y2;
    let inner = (1.0 - 2.0 * (rho + 1.0) * y1 * y2 / (s * s)).max(0.0);
    Ok(exp(-0.5 * (1.0 / y1 + 1.0 / y2) * (1.0 + sqrt(inner))))
}

/// Brown-Resnick bivariate CDF for variogram value `gamma_h`; same form as the
/// Smith CDF with `a = sqrt(gamma_h)`.
pub fn br_cdf(y1: f64, y2: f64, gamma_h: f64) -> Result<f64> {
    if !(gamma_h > 0.0) {
        bail!(Parameter, "variogram value must be > 0, got {gamma_h}");
    }
    smith_cdf(y1, y2, PairDependence { a: sqrt(gamma_h) })
}

/// Power variogram `gamma(h) = (h / range)^smooth`, 0 < smooth <= 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerVariogram {
    pub range: f64,
    pub smooth: f64,
}

impl PowerVariogram {
    pub fn new(range: f64, smooth: f64) -> Result<Self> {
        if !(range > 0.0) || !(smooth > 0.0 && smooth <= 2.0) {
            bail!(Parameter, "power variogram needs range > 0 and smooth in (0, 2], got ({range}, {smooth})");
        }
        Ok(Self { range, smooth })
    }

    pub fn value(&self, h: f64) -> f64 {
        crate::math::pow(h / self.range, self.smooth)
    }

    /// Gradient of `gamma(h)` with respect to `(range, smooth)`.
    pub fn gradient(&self, h: f64) -> [f64; 2] {
        let g = self.value(h);
        [-self.smooth / self.range * g, if h > 0.0 { g * log(h / self.range) } else { 0.0 }]
    }
}

/// Exponential correlation `rho(h) = exp(-h / range)` for the Schlather model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpCorrelation {
    pub range: f64,
}

impl ExpCorrelation {
    pub fn value(&self, h: f64) -> f64 {
        exp(-h / self.range)
    }
}

/// Dependence model used for extremal coefficient curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DependenceModel {
    Smith(SmithParams),
    Schlather(ExpCorrelation),
    BrownResnick(PowerVariogram),
}

impl DependenceModel {
    fn validate(&self) -> Result<()> {
        match self {
            Self::Smith(p) => {
                if !p.is_positive_definite() {
                    bail!(Parameter, "Sigma is not positive definite: {p:?}");
                }
            }
            Self::Schlather(c) => {
                if !(c.range > 0.0) {
                    bail!(Parameter, "correlation range must be > 0");
                }
            }
            Self::BrownResnick(v) => {
                PowerVariogram::new(v.range, v.smooth)?;
            }
        }
        Ok(())
    }
}

/// Pairwise extremal coefficient `theta(h)` in `[1, 2]` for separation vector `h`.
pub fn extremal_coefficient(model: &DependenceModel, h: [f64; 2]) -> Result<f64> {
    model.validate()?;
    let dist = sqrt(h[0] * h[0] + h[1] * h[1]);
    let theta = match model {
        DependenceModel::Smith(p) => 2.0 * std_normal_cdf(0.5 * sqrt(p.quad_form_inv(h).max(0.0))),
        DependenceModel::Schlather(c) => 1.0 + sqrt(0.5 * (1.0 - c.value(dist))),
        DependenceModel::BrownResnick(v) => 2.0 * std_normal_cdf(0.5 * sqrt(v.value(dist))),
    };
    Ok(theta.clamp(1.0, 2.0))
}

/// Smith extremal coefficient from the Mahalanobis separation.
pub fn smith_extremal_coefficient(a: f64) -> f64 {
    2.0 * std_normal_cdf(0.5 * a)
}

/// Naive pairwise extremal coefficient estimator on unit Fréchet data:
/// `1/max(Y, Y')` is exponential with rate `theta`.
pub fn naive_extremal_estimator(pairs: impl IntoIterator<Item = (f64, f64)>) -> Result<f64> {
    let mut m = 0usize;
    let mut total = 0.0;
    for (y1, y2) in pairs {
        if !(y1 > 0.0 && y2 > 0.0) {
            bail!(Data, "observations must be positive, got ({y1}, {y2})");
        }
        total += 1.0 / y1.max(y2);
        m += 1;
    }
    if m == 0 {
        bail!(Data, "need at least one observation pair");
    }
    Ok(m as f64 / total)
}

/// Brown-Resnick derivative set on Gumbel margins for one pair.
///
/// `b` is `log F_AM`, `j` the bracket of the daily density
/// `f_DA = exp(b/M) * j`, and all `*_theta` entries already include the
/// chain factor `d gamma / d theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrDerivSet {
    pub b: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub b_xy: f64,
    pub b_theta: f64,
    pub b_x_theta: f64,
    pub b_y_theta: f64,
    pub b_xy_theta: f64,
    pub j: f64,
    pub j_theta: f64,
    pub gamma_h: f64,
    /// `k1(y - x)`
    pub k1: f64,
    /// `k2(x - y)`
    pub k2: f64,
    /// `k3(y - x)`
    pub k3: f64,
}

pub fn br_k1(z: f64, gamma_h: f64) -> f64 {
    let sg = sqrt(gamma_h);
    let sg3 = gamma_h * sg;
    1.0 / (8.0 * sg) - 1.0 / (2.0 * sg3) - z / (2.0 * sg3) + z * z / (2.0 * gamma_h * sg3)
}

pub fn br_k2(z: f64, gamma_h: f64) -> f64 {
    let sg = sqrt(gamma_h);
    let sg3 = gamma_h * sg;
    1.0 / (8.0 * sg) + 1.0 / (2.0 * sg3) - z * z / (2.0 * gamma_h * sg3)
}

pub fn br_k3(z: f64, gamma_h: f64) -> f64 {
    let sg = sqrt(gamma_h);
    let sg3 = gamma_h * sg;
    -1.0 / (16.0 * sg) - 1.0 / (4.0 * sg3)
        + (1.0 / (8.0 * sg3) + 3.0 / (2.0 * gamma_h * sg3)) * z
        + z * z / (4.0 * gamma_h * sg3)
        - z * z * z / (2.0 * gamma_h * gamma_h * sg3)
}

pub fn br_gumbel_derivs(x: f64, y: f64, gamma_h: f64, dgamma_dtheta: f64, m: f64) -> Result<BrDerivSet> {
    if !(gamma_h > 0.0) || !gamma_h.is_finite() {
        bail!(Parameter, "variogram value must be finite and > 0, got {gamma_h}");
    }
    if !(m >= 1.0) {
        bail!(Parameter, "days per year must be >= 1, got {m}");
    }
    let sg = sqrt(gamma_h);
    let sg3 = gamma_h * sg;
    let a = 0.5 * sg + (y - x) / sg;
    let b = 0.5 * sg + (x - y) / sg;
    let ex = exp(-x);
    let ey = exp(-y);
    let (cap_a, cap_b) = (std_normal_cdf(a), std_normal_cdf(b));
    let (pa, pb) = (std_normal_pdf(a), std_normal_pdf(b));

    let bb = -ex * cap_a - ey * cap_b;
    let b_theta = dgamma_dtheta
        * (-ex * pa * (1.0 / (4.0 * sg) - (y - x) / (2.0 * sg3)) - ey * pb * (1.0 / (4.0 * sg) - (x - y) / (2.0 * sg3)));
    let b_x = ex * cap_a + ex * pa / sg - ey * pb / sg;
    let b_y = ey * cap_b + ey * pb / sg - ex * pa / sg;
    let b_xy = ex * pa * (1.0 / (2.0 * sg) - (y - x) / sg3) + ey * pb * (1.0 / (2.0 * sg) - (x - y) / sg3);
    let b_x_theta = dgamma_dtheta * (ex * pa * br_k1(y - x, gamma_h) + ey * pb * br_k2(x - y, gamma_h));
    let b_y_theta = dgamma_dtheta * (ey * pb * br_k1(x - y, gamma_h) + ex * pa * br_k2(y - x, gamma_h));
    let b_xy_theta = dgamma_dtheta * (ex * pa * br_k3(y - x, gamma_h) + ey * pb * br_k3(x - y, gamma_h));

    let j = b_xy / m + b_x * b_y / (m * m);
    let j_theta = b_xy_theta / m + (b_x_theta * b_y + b_x * b_y_theta) / (m * m);

    Ok(BrDerivSet {
        b: bb,
        b_x,
        b_y,
        b_xy,
        b_theta,
        b_x_theta,
        b_y_theta,
        b_xy_theta,
        j,
        j_theta,
        gamma_h,
        k1: br_k1(y - x, gamma_h),
        k2: br_k2(x - y, gamma_h),
        k3: br_k3(y - x, gamma_h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::margins::unit_frechet_cdf;
    use crate::rng::{substream, uniform_open};

    fn pd(a: f64) -> PairDependence {
        PairDependence::new(a).unwrap()
    }

    #[test]
    fn mahalanobis_examples() {
        let id = SmithParams::new(1.0, 0.0, 1.0).unwrap();
        assert!((mahalanobis_a([3.0, 4.0], [0.0, 0.0], &id).unwrap().a - 5.0).abs() < 1e-15);
        assert_eq!(mahalanobis_a([1.2, -0.3], [1.2, -0.3], &id).unwrap().a, 0.0);
        let p = SmithParams::model_i();
        // sqrt(1/2 + 1/3) = sqrt(5/6) = 0.912870929175276855...
        let a = mahalanobis_a([1.0, 1.0], [0.0, 0.0], &p).unwrap().a;
        assert!((a - 0.912_870_929_175_276_9).abs() < 1e-15);
        let a_rev = mahalanobis_a([0.0, 0.0], [1.0, 1.0], &p).unwrap().a;
        assert_eq!(a, a_rev);
        let bad = SmithParams { alpha: 1.0, beta: 2.0, gamma: 1.0 };
        assert!(mahalanobis_a([0.0, 0.0], [1.0, 0.0], &bad).is_err());
        assert!(SmithParams::new(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn smith_cdf_examples() {
        let e2 = (-2.0f64).exp();
        assert!((smith_cdf(1.0, 1.0, pd(50.0)).unwrap() - e2).abs() < 1e-15);
        assert!((smith_cdf(1.0, 1.0, pd(f64::INFINITY)).unwrap() - e2).abs() < 1e-15);
        assert!((smith_cdf(2.0, 3.0, pd(0.0)).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        // exp(-2 Phi(0.5)) = 0.250843780377747006...
        assert!((smith_cdf(1.0, 1.0, pd(1.0)).unwrap() - 0.250_843_780_377_747).abs() < 1e-14);
        assert!(smith_cdf(0.0, 1.0, pd(1.0)).is_err());
    }

    #[test]
    fn smith_exponent_examples() {
        let e = smith_exponent(1.0, 1.0, pd(1.0)).unwrap();
        // 2 Phi(0.5) = 1.382924922548026207...
        assert!((e.v - 1.382_924_922_548_026).abs() < 1e-14);
        let half = smith_exponent(2.0, 2.0, pd(1.0)).unwrap();
        assert!((half.v - e.v / 2.0).abs() < 1e-15);
        assert!(smith_exponent(1.0, 1.0, pd(0.0)).is_err());
        let ind = smith_exponent(2.0, 4.0, pd(f64::INFINITY)).unwrap();
        assert_eq!(ind.v12, 0.0);
        assert!((ind.v - 0.75).abs() < 1e-15);
    }

    /// Five-point central difference.
    fn d5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn smith_partials_match_finite_differences() {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        for &(y1, y2, a) in &[(1.0, 1.0, 1.0), (0.5, 3.0, 0.4), (10.0, 2.0, 2.5), (25.0, 19.5, 1.3)] {
            let e = smith_exponent(y1, y2, pd(a)).unwrap();
            let d1 = d5(|p| smith_exponent(p, y2, pd(a)).unwrap().v, y1, 1e-3 * y1);
            let d2 = d5(|q| smith_exponent(y1, q, pd(a)).unwrap().v, y2, 1e-3 * y2);
            let d12 = d5(|q| smith_exponent(y1, q, pd(a)).unwrap().v1, y2, 1e-3 * y2);
            assert!(rel(d1, e.v1) < 1e-6, "{d1} {}", e.v1);
            assert!(rel(d2, e.v2) < 1e-6, "{y1} {y2} {a}: {d2} {}", e.v2);
            assert!(rel(d12, e.v12) < 1e-6);
        }
    }

    #[test]
    fn smith_density_matches_mixed_second_difference() {
        for &(y1, y2, a) in &[(1.0, 1.0, 1.0), (2.0, 0.7, 0.6), (5.0, 8.0, 2.0)] {
            let e = smith_exponent(y1, y2, pd(a)).unwrap();
            let dens = (-e.v).exp() * (e.v1 * e.v2 - e.v12);
            let f = |p: f64, q: f64| smith_cdf(p, q, pd(a)).unwrap();
            let (h1, h2) = (1e-4 * y1, 1e-4 * y2);
            let mixed = (f(y1 + h1, y2 + h2) - f(y1 + h1, y2 - h2) - f(y1 - h1, y2 + h2) + f(y1 - h1, y2 - h2))
                / (4.0 * h1 * h2);
            assert!((mixed - dens).abs() / dens < 1e-5, "{mixed} vs {dens}");
        }
    }

    #[test]
    fn exponent_bounds_and_homogeneity() {
        for &(y1, y2) in &[(0.3, 0.9), (1.0, 1.0), (7.0, 2.0), (40.0, 39.0)] {
            for &a in &[0.05, 0.5, 1.0, 3.0, 9.0] {
                let e = smith_exponent(y1, y2, pd(a)).unwrap();
                assert!(e.v >= (1.0 / y1).max(1.0 / y2) - 1e-15);
                assert!(e.v <= 1.0 / y1 + 1.0 / y2 + 1e-15);
                assert!(e.v1 <= 0.0 && e.v2 <= 0.0);
                for &c in &[0.5, 2.0, 10.0] {
                    let s = smith_exponent(c * y1, c * y2, pd(a)).unwrap();
                    assert!((s.v * c - e.v).abs() < 1e-12 * e.v.max(1.0));
                }
                let f = smith_cdf(y1, y2, pd(a)).unwrap();
                let swapped = smith_cdf(y2, y1, pd(a)).unwrap();
                assert!((f - swapped).abs() < 1e-15);
                let lower = (-1.0 / y1 - 1.0 / y2).exp();
                let upper = (-(1.0 / y1).max(1.0 / y2)).exp();
                assert!(f >= lower - 1e-15 && f <= upper + 1e-15);
            }
        }
    }

    #[test]
    fn schlather_examples() {
        let y: f64 = 1.7;
        assert!((schlather_cdf(y, y, 1.0).unwrap() - (-1.0 / y).exp()).abs() < 1e-15);
        assert!((schlather_cdf(2.0, 5.0, -1.0).unwrap() - (-0.5f64 - 0.2).exp()).abs() < 1e-15);
        // exp(-(1 + sqrt 0.5)) = 0.181389834649615164...
        assert!((schlather_cdf(1.0, 1.0, 0.0).unwrap() - 0.181_389_834_649_615_2).abs() < 1e-15);
        assert!(schlather_cdf(1.0, 1.0, 1.2).is_err());
        assert!((schlather_cdf(0.8, 3.0, 0.3).unwrap() - schlather_cdf(3.0, 0.8, 0.3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn br_examples() {
        let far = br_cdf(1.0, 2.0, 1e4).unwrap();
        assert!((far - (-1.5f64).exp()).abs() < 1e-12);
        // exp(-2 Phi(1)) = 0.185873398148184399...
        assert!((br_cdf(1.0, 1.0, 4.0).unwrap() - 0.185_873_398_148_184_4).abs() < 1e-14);
        for &(y1, y2, g) in &[(0.4f64, 2.0f64, 0.3f64), (3.0, 3.0, 1.0), (9.0, 1.5, 6.0)] {
            let s = smith_cdf(y1, y2, pd(g.sqrt())).unwrap();
            assert_eq!(br_cdf(y1, y2, g).unwrap(), s);
        }
        assert!(br_cdf(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn extremal_coefficients() {
        let smith = DependenceModel::Smith(SmithParams::model_i());
        assert_eq!(extremal_coefficient(&smith, [0.0, 0.0]).unwrap(), 1.0);
        assert!((smith_extremal_coefficient(1.0) - 1.382_924_922_548_026).abs() < 1e-14);
        let sch = DependenceModel::Schlather(ExpCorrelation { range: 1.0 });
        // rho(h) = 0 is approached only as h -> inf; check the formula directly at rho = exp(-h)
        let h = 2.0f64;
        let expect = 1.0 + (0.5 * (1.0 - (-h).exp())).sqrt();
        assert!((extremal_coefficient(&sch, [h, 0.0]).unwrap() - expect).abs() < 1e-15);
        assert!((1.0 + 0.5f64.sqrt() - 1.707_106_781_186_547_5).abs() < 1e-15);
        let br = DependenceModel::BrownResnick(PowerVariogram { range: 1.5, smooth: 1.0 });
        let mut prev = 1.0;
        for i in 0..50 {
            let hv = [0.2 * i as f64, 0.1 * i as f64];
            for m in [&smith, &sch, &br] {
                let t = extremal_coefficient(m, hv).unwrap();
                assert!((1.0..=2.0).contains(&t));
            }
            let t = extremal_coefficient(&br, hv).unwrap();
            assert!(t >= prev);
            prev = t;
        }
    }

    #[test]
    fn naive_estimator() {
        assert_eq!(naive_extremal_estimator([(1.0, 1.0)]).unwrap(), 1.0);
        assert!(naive_extremal_estimator([(1.0, -1.0)]).is_err());
        assert!(naive_extremal_estimator(core::iter::empty()).is_err());

        let mut rng = substream(11, 0);
        let m = 100_000;
        let mut ind = std::vec::Vec::with_capacity(m);
        let mut same = std::vec::Vec::with_capacity(m);
        for _ in 0..m {
            let a = -1.0 / uniform_open(&mut rng).ln();
            let b = -1.0 / uniform_open(&mut rng).ln();
            ind.push((a, b));
            same.push((a, a));
        }
        let th = naive_extremal_estimator(ind).unwrap();
        // theta_hat = m / sum Exp(2): sd approximately 2 / sqrt(m)
        assert!((th - 2.0).abs() < 3.0 * 2.0 / (m as f64).sqrt(), "theta={th}");
        let th1 = naive_extremal_estimator(same).unwrap();
        assert!((th1 - 1.0).abs() < 3.0 / (m as f64).sqrt());
        let _ = unit_frechet_cdf(1.0);
    }

    #[test]
    fn br_k_values() {
        // k2(0) = 1/8 + 1/2 at gamma = 1
        assert!((br_k2(0.0, 1.0) - 0.625).abs() < 1e-15);
        assert!(br_gumbel_derivs(0.0, 0.0, 0.0, 1.0, 100.0).is_err());
        assert!(br_gumbel_derivs(0.0, 0.0, -1.0, 1.0, 100.0).is_err());
    }

    #[test]
    fn br_diagonal_reduction() {
        // x = y: dB/dtheta = gamma' * (-e^-x phi(sqrt(g)/2) / (2 sqrt g))
        for &(x, g, dg) in &[(0.0, 1.0, 1.0), (1.3, 2.5, 0.7), (-0.4, 0.3, -2.0)] {
            let d = br_gumbel_derivs(x, x, g, dg, 100.0).unwrap();
            let sg: f64 = g.sqrt();
            let expect = dg * (-(-x as f64).exp() * std_normal_pdf(sg / 2.0) / (2.0 * sg));
            assert!((d.b_theta - expect).abs() < 1e-14 * expect.abs().max(1.0));
            let b_expect = -2.0 * (-x as f64).exp() * std_normal_cdf(sg / 2.0);
            assert!((d.b - b_expect).abs() < 1e-14);
            assert!(d.b <= 0.0);
        }
    }

    #[test]
    fn br_partials_match_finite_differences() {
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
        let m = 100.0;
        for &(x, y, g) in &[(0.0, 0.0, 1.0), (0.3, -0.4, 1.7), (1.5, 0.2, 0.6), (-0.8, 0.9, 3.0)] {
            let d = br_gumbel_derivs(x, y, g, 1.0, m).unwrap();
            let bf = |x: f64, y: f64, g: f64| br_gumbel_derivs(x, y, g, 1.0, m).unwrap();
            let h = 1e-5;
            assert!(rel((bf(x + h, y, g).b - bf(x - h, y, g).b) / (2.0 * h), d.b_x) < 1e-6);
            assert!(rel((bf(x, y + h, g).b - bf(x, y - h, g).b) / (2.0 * h), d.b_y) < 1e-6);
            assert!(rel((bf(x, y + h, g).b_x - bf(x, y - h, g).b_x) / (2.0 * h), d.b_xy) < 1e-6);
            let hg = 1e-6 * g;
            assert!(rel((bf(x, y, g + hg).b - bf(x, y, g - hg).b) / (2.0 * hg), d.b_theta) < 1e-6);
            assert!(rel((bf(x, y, g + hg).b_x - bf(x, y, g - hg).b_x) / (2.0 * hg), d.b_x_theta) < 1e-6);
            assert!(rel((bf(x, y, g + hg).b_y - bf(x, y, g - hg).b_y) / (2.0 * hg), d.b_y_theta) < 1e-6);
            assert!(rel((bf(x, y, g + hg).b_xy - bf(x, y, g - hg).b_xy) / (2.0 * hg), d.b_xy_theta) < 1e-6);
            assert!(rel((bf(x, y, g + hg).j - bf(x, y, g - hg).j) / (2.0 * hg), d.j_theta) < 1e-6);
        }
    }

    #[test]
    fn power_variogram_gradient() {
        let v = PowerVariogram::new(2.0, 1.3).unwrap();
        let h = 3.1;
        let g = v.gradient(h);
        let e = 1e-6;
        let dr = (PowerVariogram::new(2.0 + e, 1.3).unwrap().value(h) - PowerVariogram::new(2.0 - e, 1.3).unwrap().value(h)) / (2.0 * e);
        let dn = (PowerVariogram::new(2.0, 1.3 + e).unwrap().value(h) - PowerVariogram::new(2.0, 1.3 - e).unwrap().value(h)) / (2.0 * e);
        assert!((dr - g[0]).abs() < 1e-8 && (dn - g[1]).abs() < 1e-8);
        assert!(PowerVariogram::new(1.0, 2.5).is_err());
    }
}
