//! Scalar special functions on top of `libm`.

use core::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

pub use libm::{erfc, exp, expm1, fabs, log, log1p, pow, sqrt};

/// 1/sqrt(2*pi)
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// ln(sqrt(2*pi))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF, saturated to exactly 0 or 1 beyond |x| = 8.
pub fn std_normal_cdf(x: f64) -> f64 {
    if x < -8.0 {
        0.0
    } else if x > 8.0 {
        1.0
    } else {
        0.5 * erfc(-x * FRAC_1_SQRT_2)
    }
}

/// Standard normal survival function without tail saturation.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

pub fn std_normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * exp(-0.5 * x * x)
}

pub fn ln_std_normal_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// log Phi(x), accurate in both tails.
pub fn ln_std_normal_cdf(x: f64) -> f64 {
    if x > 0.0 {
        log1p(-0.5 * erfc(x * FRAC_1_SQRT_2))
    } else if x > -30.0 {
        log(0.5 * erfc(-x * FRAC_1_SQRT_2))
    } else {
        // Mills ratio asymptotic series
        let r = 1.0 / (x * x);
        let series = 1.0 - r * (1.0 - r * (3.0 - r * (15.0 - r * (105.0 - r * 945.0))));
        ln_std_normal_pdf(x) - log(-x) + log(series)
    }
}

/// Inverse of the standard normal CDF (Acklam's rational approximation
/// polished by one Halley step).
pub fn std_normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const P_LOW: f64 = 0.024_25;
    let x = if p < P_LOW {
        let q = sqrt(-2.0 * log(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = sqrt(-2.0 * log1p(-p));
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = 0.5 * erfc(-x / SQRT_2) - p;
    let u = e * sqrt(2.0 * PI) * exp(0.5 * x * x);
    x - u / (1.0 + 0.5 * x * u)
}

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// Pairwise (tree) summation. The reduction shape depends only on the length,
/// so results are reproducible however the terms were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

/// Streaming version of [`pairwise_sum`]: leaves of 16 terms combined along a
/// binary counter. The result depends only on the order of pushed terms.
#[derive(Debug, Clone)]
pub struct PairwiseAccumulator {
    leaf: [f64; 16],
    len: usize,
    levels: [f64; 48],
    occupied: u64,
}

impl Default for PairwiseAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl PairwiseAccumulator {
    pub fn new() -> Self {
        Self { leaf: [0.0; 16], len: 0, levels: [0.0; 48], occupied: 0 }
    }

    pub fn push(&mut self, x: f64) {
        self.leaf[self.len] = x;
        self.len += 1;
        if self.len == 16 {
            let mut carry: f64 = self.leaf.iter().sum();
            self.len = 0;
            let mut k = 0;
            while self.occupied & (1 << k) != 0 {
                carry += self.levels[k];
                self.occupied &= !(1 << k);
                k += 1;
            }
            self.levels[k] = carry;
            self.occupied |= 1 << k;
        }
    }

    pub fn sum(&self) -> f64 {
        let mut total: f64 = self.leaf[..self.len].iter().sum();
        for k in 0..48 {
            if self.occupied & (1 << k) != 0 {
                total += self.levels[k];
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_reference_values() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        // erf oracle: 0.5 * (1 + erf(0.5/sqrt 2)) = 0.691462461274013103637...
        assert!((std_normal_cdf(0.5) - 0.691_462_461_274_013_1).abs() < 1e-15);
        // Phi(-3) = 0.00134989803163009452665...
        assert!((std_normal_cdf(-3.0) - 0.001_349_898_031_630_094_5).abs() < 1e-16);
        assert_eq!(std_normal_cdf(-8.5), 0.0);
        assert_eq!(std_normal_cdf(8.5), 1.0);
    }

    #[test]
    fn phi_symmetry() {
        for i in -80..=80 {
            let x = i as f64 * 0.1;
            assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn ln_phi_matches_direct_and_tail_series() {
        for &x in &[-25.0, -5.0, -1.0, 0.0, 2.0, 7.0] {
            let direct = log(0.5 * erfc(-x / SQRT_2));
            assert!((ln_std_normal_cdf(x) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        }
        // continuity across the series switch
        for &x in &[-30.0 - 1e-9, -31.0, -35.0] {
            let direct = log(0.5 * erfc(-x / SQRT_2));
            assert!((ln_std_normal_cdf(x) - direct).abs() < 1e-12 * direct.abs());
        }
        // log Phi(-40) = -804.608442013754...
        assert!((ln_std_normal_cdf(-40.0) + 804.608_442_013_754).abs() < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &p in &[1e-10, 0.001, 0.02, 0.3, 0.5, 0.77, 0.99, 1.0 - 1e-9] {
            let x = std_normal_quantile(p);
            assert!((0.5 * erfc(-x / SQRT_2) - p).abs() < 1e-14 * p.max(1e-3));
        }
    }

    #[test]
    fn streaming_pairwise_sum() {
        let xs: std::vec::Vec<f64> = (0..1000).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let mut acc = PairwiseAccumulator::new();
        xs.iter().for_each(|&x| acc.push(x));
        let naive: f64 = xs.iter().sum();
        assert!((acc.sum() - naive).abs() < 1e-12);
        assert!((acc.sum() - pairwise_sum(&xs)).abs() < 1e-13);
        assert_eq!(PairwiseAccumulator::new().sum(), 0.0);
    }

    #[test]
    fn log_add_exp_handles_extremes() {
        assert!((log_add_exp(-1000.0, -1000.0) - (-1000.0 + core::f64::consts::LN_2)).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }
}
