//! Second-order regular variation of the bivariate normal: the exceedance
//! law of a standard bivariate normal, renormalised at level `t`, approaches
//! its limit `H` at rate `A(t)` with second-order function `Psi`.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::math::{exp, log, sqrt, std_normal_cdf, std_normal_pdf, std_normal_sf, LN_SQRT_2PI};
use crate::maxstable::br_gumbel_derivs;

/// `(a_t, b_t)` with `a_t = 1/sqrt(2 log t)` and
/// `b_t = sqrt(2 log t) - (log log t + log 4 pi) / (2 sqrt(2 log t))`.
pub fn normalizing_constants(t: f64) -> Result<(f64, f64)> {
    if !(t > core::f64::consts::E) || !t.is_finite() {
        bail!(Domain, "normalizing constants need finite t > e, got {t}");
    }
    let l = log(t);
    let r = sqrt(2.0 * l);
    let b = r - 0.5 * (log(l) + log(4.0 * core::f64::consts::PI)) / r;
    Ok((1.0 / r, b))
}

// Gauss-Legendre half rules (6, 12 and 20 points) used by Genz's BVND.
const GL_W: [[f64; 10]; 3] = [
    [0.171_324_492_379_170_5, 0.360_761_573_048_138_4, 0.467_913_934_572_690_4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        0.471_753_363_865_117_7e-1,
        0.106_939_325_995_318_3,
        0.160_078_328_543_346_4,
        0.203_167_426_723_065_9,
        0.233_492_536_538_354_7,
        0.249_147_045_813_402_9,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        0.176_140_071_391_521_2e-1,
        0.406_014_298_003_869_4e-1,
        0.626_720_483_341_090_6e-1,
        0.832_767_415_767_047_5e-1,
        0.101_930_119_817_240_4,
        0.118_194_531_961_518_4,
        0.131_688_638_449_176_6,
        0.142_096_109_318_382_1,
        0.149_172_986_472_603_7,
        0.152_753_387_130_725_9,
    ],
];
const GL_X: [[f64; 10]; 3] = [
    [-0.932_469_514_203_152_2, -0.661_209_386_466_264_7, -0.238_619_186_083_197_0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        -0.981_560_634_246_719_1,
        -0.904_117_256_370_475_0,
        -0.769_902_674_194_305_0,
        -0.587_317_954_286_617_1,
        -0.367_831_498_998_180_2,
        -0.125_233_408_511_469_2,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        -0.993_128_599_185_094_9,
        -0.963_971_927_277_913_8,
        -0.912_234_428_251_325_9,
        -0.839_116_971_822_218_8,
        -0.746_331_906_460_150_8,
        -0.636_053_680_726_515_0,
        -0.510_867_001_950_827_1,
        -0.373_706_088_715_419_6,
        -0.227_785_851_141_645_1,
        -0.765_265_211_334_973_3e-1,
    ],
];

/// Genz's BVND: `P(X > h, Y > k)` for a standard bivariate normal with
/// correlation `r`.
fn bvnd(h: f64, k: f64, r: f64) -> f64 {
    let tp = 2.0 * core::f64::consts::PI;
    let (ng, lg) = if r.abs() < 0.3 {
        (0, 3)
    } else if r.abs() < 0.75 {
        (1, 6)
    } else {
        (2, 10)
    };
    let (w, x) = (&GL_W[ng], &GL_X[ng]);
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = libm::asin(r);
        for i in 0..lg {
            let sn = libm::sin(asr * (x[i] + 1.0) / 2.0);
            bvn += w[i] * exp((sn * hk - hs) / (1.0 - sn * sn));
            let sn = libm::sin(asr * (-x[i] + 1.0) / 2.0);
            bvn += w[i] * exp((sn * hk - hs) / (1.0 - sn * sn));
        }
        return bvn * asr / (2.0 * tp) + std_normal_sf(h) * std_normal_sf(k);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let as_ = (1.0 - r) * (1.0 + r);
        let mut a = sqrt(as_);
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 16.0;
        bvn = a * exp(-(bs / as_ + hk) / 2.0) * (1.0 - c * (bs - as_) * (1.0 - d * bs / 5.0) / 3.0 + c * d * as_ * as_ / 5.0);
        if hk > -160.0 {
            let b = sqrt(bs);
            bvn -= exp(-hk / 2.0) * sqrt(tp) * std_normal_sf(b / a) * b * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
        }
        a /= 2.0;
        for i in 0..lg {
            let xs = (a * (x[i] + 1.0)) * (a * (x[i] + 1.0));
            let rs = sqrt(1.0 - xs);
            bvn += a * w[i] * (exp(-bs / (2.0 * xs) - hk / (1.0 + rs)) / rs - exp(-(bs / xs + hk) / 2.0) * (1.0 + c * xs * (1.0 + d * xs)));
            let xs = as_ * (-x[i] + 1.0) * (-x[i] + 1.0) / 4.0;
            let rs = sqrt(1.0 - xs);
            bvn += a * w[i] * exp(-(bs / xs + hk) / 2.0) * (exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs - (1.0 + c * xs * (1.0 + d * xs)));
        }
        bvn = -bvn / tp;
    }
    if r > 0.0 {
        bvn + std_normal_sf(h.max(k))
    } else {
        -bvn + (std_normal_sf(h) - std_normal_sf(k)).max(0.0)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !(rho > -1.0 && rho < 1.0) {
        bail!(Parameter, "correlation must lie in (-1, 1), got {rho}");
    }
    Ok(())
}

/// `P(X <= x, Y <= y)` for a standard bivariate normal with correlation `rho`.
pub fn bvn_cdf(x: f64, y: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if x.is_nan() || y.is_nan() {
        bail!(Domain, "bvn_cdf arguments must not be NaN");
    }
    if x == f64::NEG_INFINITY || y == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(std_normal_cdf(y));
    }
    if y == f64::INFINITY {
        return Ok(std_normal_cdf(x));
    }
    Ok(bvnd(-x, -y, rho).clamp(0.0, 1.0))
}

/// Adaptive 7/15-point Gauss-Kronrod on `[a, b]` to relative tolerance `tol`.
fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    const XK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_727_8,
    ];
    const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let (f1, f2) = (f(c - h * XK[i]), f(c + h * XK[i]));
        k += WK[i] * (f1 + f2);
        if i % 2 == 1 {
            g += WG[i / 2] * (f1 + f2);
        }
    }
    let (k, g) = (k * h, g * h);
    if depth == 0 || (k - g).abs() <= tol * k.abs() {
        return k;
    }
    gauss_kronrod(f, a, c, tol, depth - 1) + gauss_kronrod(f, c, b, tol, depth - 1)
}

/// `P(X > h, Y > k)` with relative accuracy maintained deep in the joint
/// upper tail, via `int_h^inf phi(z) Q((k - rho z)/sqrt(1 - rho^2)) dz`.
pub fn bvn_upper_tail(h: f64, k: f64, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let s = sqrt(1.0 - rho * rho);
    let f = |z: f64| std_normal_pdf(z) * std_normal_sf((k - rho * z) / s);
    let start = h.max(-40.0);
    // the integrand decays at least like exp(-z^2/2) beyond start
    let mut total = 0.0;
    let mut lo = start;
    let step = 1.0 / (1.0 + start.abs());
    let mut width = step;
    while lo < 40.0 {
        let hi = lo + width;
        let piece = gauss_kronrod(&f, lo, hi, 1e-14, 30);
        total += piece;
        if piece <= 1e-17 * total && lo > start + 1.0 {
            break;
        }
        lo = hi;
        width *= 2.0;
    }
    Ok(total)
}

/// `1 - F(x, y)` for the standard bivariate normal, accurate in the upper tail.
pub fn bvn_joint_survival_complement(x: f64, y: f64, rho: f64) -> Result<f64> {
    Ok(std_normal_sf(x) + std_normal_sf(y) - bvn_upper_tail(x, y, rho)?)
}

/// `Psi(x, y) = exp{-(x + y)/(1 + rho)} + e^-x + e^-y`.
pub fn psi(x: f64, y: f64, rho: f64) -> f64 {
    exp(-(x + y) / (1.0 + rho)) + exp(-x) + exp(-y)
}

/// Choice of normalising constants, rate and limit used to measure the gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapConvention {
    /// `a_t = 1/sqrt(2 log t)`, `A(t) = 1/(2 log t)`, `H = 1 - (e^-x + e^-y)`.
    Literal,
    /// As `Literal` but with `H = 1 - (e^-x + e^-y)/2`, normalised by
    /// `-log G(0, 0) = 2`.
    LiteralNormalized,
    /// `a_t = 1/b_t`, `A(t) = 1/b_t^2`, normalised `H`.
    InverseLocation,
}

impl GapConvention {
    pub const ALL: [GapConvention; 3] = [Self::Literal, Self::LiteralNormalized, Self::InverseLocation];

    pub fn name(self) -> &'static str {
        match self {
            Self::Literal => "literal",
            Self::LiteralNormalized => "literal_normalized",
            Self::InverseLocation => "inverse_location",
        }
    }

    fn normalized_h(self) -> bool {
        !matches!(self, Self::Literal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapPoint {
    pub x: f64,
    pub y: f64,
    pub gap_over_a: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderEval {
    pub rho: f64,
    pub t: f64,
    pub convention: GapConvention,
    pub a_t: f64,
    pub b_t: f64,
    /// The rate `A(t)`.
    pub rate: f64,
    pub points: Vec<GapPoint>,
}

impl SecondOrderEval {
    pub fn mean_abs_deviation(&self) -> f64 {
        self.points.iter().map(|p| (p.gap_over_a - p.psi).abs()).sum::<f64>() / self.points.len() as f64
    }
}

/// The fixed grid `{0, 0.5, 1, 1.5, 2}^2`.
pub fn default_gap_grid() -> Vec<(f64, f64)> {
    let g = [0.0, 0.5, 1.0, 1.5, 2.0];
    g.iter().flat_map(|&x| g.iter().map(move |&y| (x, y))).collect()
}

/// `(F_{b_t,d_t}(a_t x, c_t y) - H(x, y)) / A(t)` over `grid`, with
/// `b_t = d_t`, `a_t = c_t` and
/// `F_{b_t,d_t}(a_t x, c_t y) = 1 - [1 - F(a_t x + b_t, c_t y + d_t)] / [1 - F(b_t, d_t)]`.
pub fn second_order_gap(rho: f64, t: f64, grid: &[(f64, f64)], convention: GapConvention) -> Result<SecondOrderEval> {
    check_rho(rho)?;
    let (a_formula, b_t) = normalizing_constants(t)?;
    let (a_t, rate) = match convention {
        GapConvention::Literal | GapConvention::LiteralNormalized => (a_formula, 1.0 / (2.0 * log(t))),
        GapConvention::InverseLocation => (1.0 / b_t, 1.0 / (b_t * b_t)),
    };
    let denom = bvn_joint_survival_complement(b_t, b_t, rho)?;
    if !(denom > 1e-300) {
        bail!(Degenerate, "1 - F(b_t, b_t) = {denom} underflows at t = {t}");
    }
    let mut points = Vec::with_capacity(grid.len());
    for &(x, y) in grid {
        let num = bvn_joint_survival_complement(a_t * x + b_t, a_t * y + b_t, rho)?;
        let f_cond = 1.0 - num / denom;
        let tail = exp(-x) + exp(-y);
        let h = if convention.normalized_h() { 1.0 - 0.5 * tail } else { 1.0 - tail };
        points.push(GapPoint { x, y, gap_over_a: (f_cond - h) / rate, psi: psi(x, y, rho) });
    }
    Ok(SecondOrderEval { rho, t, convention, a_t, b_t, rate, points })
}

/// One grid point of the density-residual envelope check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    /// `|g_t(x, y) {(f_t(x, y) - h(x, y))/A(t) - psi}|`
    pub product: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    /// Envelope `C phi(c1 (x + y)/2 + c2)`.
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub points: Vec<EnvelopePoint>,
}

impl EnvelopeCheck {
    pub fn holds(&self) -> bool {
        self.points.iter().all(|p| p.product <= p.envelope)
    }
}

/// Density-level residual `(f_{b_t}(a_t x, a_t y) - h)/A(t) - psi` with
/// `h = 0`, `A(t) = 1/(2 log t)`, `a_t = 1/b_t` and `psi = -rho/(2(1 - rho^2))`.
pub fn density_residual(x: f64, y: f64, rho: f64, t: f64) -> Result<f64> {
    check_rho(rho)?;
    let (_, b_t) = normalizing_constants(t)?;
    let a_t = 1.0 / b_t;
    let (u, v) = (a_t * x + b_t, a_t * y + b_t);
    let s2 = 1.0 - rho * rho;
    let ln_phi2 = -2.0 * LN_SQRT_2PI - 0.5 * log(s2) - (u * u + v * v - 2.0 * rho * u * v) / (2.0 * s2);
    let denom = bvn_joint_survival_complement(b_t, b_t, rho)?;
    let f = a_t * a_t * exp(ln_phi2) / denom;
    let psi_d = -rho / (2.0 * s2);
    Ok(f * 2.0 * log(t) - psi_d)
}

/// Bound check for the product of the Brown-Resnick daily score `g_t` (on
/// Gumbel margins, variogram value `gamma_h`, `M` days per year, `theta =
/// gamma`) and the density residual. Envelope constants are fitted on the
/// first level in `ts` (log-quadratic fit, then a factor-2 margin on the
/// largest ratio) and frozen for the remaining levels.
pub fn envelope_check(rho: f64, ts: &[f64], grid: &[(f64, f64)], gamma_h: f64, m: f64) -> Result<EnvelopeCheck> {
    if ts.is_empty() || grid.len() < 3 {
        bail!(Config, "need at least one level and three grid points");
    }
    let product = |x: f64, y: f64, t: f64| -> Result<f64> {
        let d = br_gumbel_derivs(x, y, gamma_h, 1.0, m)?;
        let g = d.b_theta / m + d.j_theta / d.j;
        Ok((g * density_residual(x, y, rho, t)?).abs())
    };
    // least squares of log product on s = (x + y)/2: q0 + q1 s + q2 s^2
    let first: Vec<(f64, f64)> = grid
        .iter()
        .map(|&(x, y)| Ok((0.5 * (x + y), product(x, y, ts[0])?)))
        .collect::<Result<_>>()?;
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for &(s, p) in &first {
        let row = [1.0, s, s * s];
        let lp = log(p.max(1e-300));
        for i in 0..3 {
            atb[i] += row[i] * lp;
            for j in 0..3 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let q = crate::linalg::mat_vec(&crate::linalg::inverse(&ata)?, &atb);
    // a convex or flat fit keeps a unit-order width so the envelope stays integrable
    let c1 = sqrt((-2.0 * q[2]).max(0.25));
    let c2 = -q[1] / c1;
    let shape = |s: f64| std_normal_pdf(c1 * s + c2).max(1e-300);
    let c = 2.0 * first.iter().map(|&(s, p)| p / shape(s)).fold(0.0, f64::max);
    let mut points = Vec::new();
    for &t in ts {
        for &(x, y) in grid {
            let s = 0.5 * (x + y);
            points.push(EnvelopePoint { t, x, y, product: product(x, y, t)?, envelope: c * shape(s) });
        }
    }
    Ok(EnvelopeCheck { c, c1, c2, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants() {
        let (a, b) = normalizing_constants(8f64.exp()).unwrap();
        assert!((a - 0.25).abs() < 1e-15);
        assert!((b - 3.423_691_776_418_859).abs() < 1e-13);
        let (a16, b16) = normalizing_constants(1e16).unwrap();
        assert!((a16 * b16 - 1.0).abs() < 0.05);
        assert!((a16 * b16 - 0.958_350_851_009_726_8).abs() < 1e-12);
        let a4 = normalizing_constants(1e4).unwrap().0;
        let a8 = normalizing_constants(1e8).unwrap().0;
        assert!(a4 > a8 && a8 > a16);
        assert!(normalizing_constants(2.0).is_err());
        assert!(normalizing_constants(core::f64::consts::E).is_err());
    }

    #[test]
    fn bvn_reference_values() {
        assert!((bvn_cdf(0.0, 0.0, 0.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((bvn_cdf(0.0, 0.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        for &x in &[-2.0, 0.3, 1.7] {
            assert!((bvn_cdf(x, f64::INFINITY, 0.4).unwrap() - std_normal_cdf(x)).abs() < 1e-15);
            // large finite y also marginalises
            assert!((bvn_cdf(x, 40.0, 0.4).unwrap() - std_normal_cdf(x)).abs() < 1e-14);
        }
        assert!(bvn_cdf(0.0, 0.0, 1.0).is_err());
        // upper orthant oracle values (40-digit quadrature)
        let cases = [
            ((-1.2, 0.7, -0.6), 0.167_908_403_750_057_9),
            ((2.0, 3.0, 0.95), 0.001_348_785_152_678_894),
            ((1.5, -0.5, 0.8), 0.066_758_158_053_758_16),
        ];
        for ((h, k, r), v) in cases {
            assert!((bvnd(h, k, r) - v).abs() < 1e-13, "bvnd({h},{k},{r})");
            assert!((bvn_upper_tail(h, k, r).unwrap() - v).abs() < 1e-14, "tail({h},{k},{r})");
        }
        let deep = bvn_upper_tail(8.3, 8.3, 0.5).unwrap();
        assert!((deep / 6.405_900_816_527_093e-23 - 1.0).abs() < 1e-10);
        let mid = bvn_upper_tail(5.1, 6.2, 0.3).unwrap();
        assert!((mid / 1.165_861_320_269_588e-13 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn psi_origin() {
        assert_eq!(psi(0.0, 0.0, 0.0), 3.0);
    }

    #[test]
    fn gap_tables() {
        let grid = default_gap_grid();
        assert_eq!(grid.len(), 25);
        // 40-digit reference means of |gap/A - Psi|
        let expect = [(0.0, [0.8261, 0.8103, 0.8025]), (0.5, [0.9433, 0.9037, 0.8922])];
        for (rho, means) in expect {
            let mut prev = f64::INFINITY;
            for (k, &t) in [1e4, 1e8, 1e16].iter().enumerate() {
                let e = second_order_gap(rho, t, &grid, GapConvention::InverseLocation).unwrap();
                let m = e.mean_abs_deviation();
                assert!((m - means[k]).abs() < 1e-4, "rho={rho} t={t}: {m}");
                assert!(m < prev);
                prev = m;
            }
        }
        let lit = second_order_gap(0.0, 1e4, &grid, GapConvention::Literal).unwrap();
        assert!((lit.mean_abs_deviation() - 7.24).abs() < 0.01);
        assert!((lit.rate - 1.0 / (2.0 * 1e4f64.ln())).abs() < 1e-16);
    }

    #[test]
    fn envelope_is_frozen_and_reported() {
        let grid = default_gap_grid();
        let chk = envelope_check(0.5, &[1e4, 1e8, 1e16], &grid, 1.0, 100.0).unwrap();
        assert_eq!(chk.points.len(), 75);
        assert!(chk.c1 > 0.0 && chk.c > 0.0);
        assert!(chk.points[..25].iter().all(|p| p.product <= p.envelope));
    }
}
