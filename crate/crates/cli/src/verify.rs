//! Self-check suites run by `maxstable verify`.

use maxstable_core::asymptotics::{
    bvn_cdf, bvn_upper_tail, default_gap_grid, normalizing_constants, envelope_check, second_order_gap,
    GapConvention,
};
use maxstable_core::margins::{
    frechet_quantile, gev_cdf, gev_pdf, gpd_cdf, gumbel_from_frechet, unit_frechet_cdf, GevParams, GpdParams,
};
use maxstable_core::maxstable::{
    br_cdf, br_gumbel_derivs, br_k2, schlather_cdf, smith_cdf, smith_exponent, BrDerivSet, PairDependence,
};
use maxstable_core::Result;

use crate::files::{fmt_f64, write_table};
use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Margins,
    Maxstable,
    AppendixA,
    AppendixB,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Self::Margins => "margins",
            Self::Maxstable => "maxstable",
            Self::AppendixA => "appendix-a",
            Self::AppendixB => "appendix-b",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Absolute(f64),
    Relative(f64),
    /// Passes when `value <= reference`.
    AtMost,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: Tolerance,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, reference: f64, tolerance: Tolerance) -> Self {
        Self { name: name.into(), value, reference, tolerance }
    }

    pub fn error(&self) -> f64 {
        match self.tolerance {
            Tolerance::Absolute(_) | Tolerance::AtMost => (self.value - self.reference).abs(),
            Tolerance::Relative(_) => (self.value - self.reference).abs() / self.reference.abs(),
        }
    }

    pub fn pass(&self) -> bool {
        match self.tolerance {
            Tolerance::Absolute(t) | Tolerance::Relative(t) => self.error() <= t,
            Tolerance::AtMost => self.value <= self.reference,
        }
    }
}

pub fn run_suite(suite: Suite) -> Result<Vec<Check>> {
    match suite {
        Suite::Margins => margins(),
        Suite::Maxstable => maxstable(),
        Suite::AppendixA => appendix_a(),
        Suite::AppendixB => appendix_b(),
    }
}

pub fn write_checks(path: &std::path::Path, checks: &[Check]) -> CliResult<()> {
    let rows = checks.iter().map(|c| {
        let (kind, tol) = match c.tolerance {
            Tolerance::Absolute(t) => ("abs", fmt_f64(t)),
            Tolerance::Relative(t) => ("rel", fmt_f64(t)),
            Tolerance::AtMost => ("at_most", String::new()),
        };
        vec![
            c.name.clone(),
            fmt_f64(c.value),
            fmt_f64(c.reference),
            kind.to_string(),
            tol,
            fmt_f64(c.error()),
            if c.pass() { "pass" } else { "fail" }.to_string(),
        ]
    });
    write_table(path, &["check", "value", "reference", "kind", "tolerance", "error", "result"], rows)
}

/// Five-point central difference.
pub fn d5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn margins() -> Result<Vec<Check>> {
    use Tolerance::*;
    let e_inv = (-1.0f64).exp();
    let gumbel = GevParams::new(0.0, 1.0, 0.0)?;
    let frechet = GevParams::new(0.0, 1.0, 0.5)?;
    let mut out = vec![
        Check::new("gev_cdf gumbel at 0", gev_cdf(0.0, &gumbel)?, e_inv, Absolute(1e-15)),
        Check::new("gev_cdf xi=0.5 at 1", gev_cdf(1.0, &frechet)?, 0.641_180_388_429_954_6, Absolute(1e-15)),
        Check::new("gpd_cdf xi=0.2 at 1", gpd_cdf(1.0, &GpdParams::new(1.0, 0.2)?)?, 0.598_122_427_983_539, Absolute(1e-14)),
        Check::new("unit frechet cdf at 1", unit_frechet_cdf(1.0), e_inv, Absolute(1e-16)),
        Check::new("frechet quantile 0.95", frechet_quantile(0.95)?, 19.495_725_746_223_69, Absolute(1e-12)),
        Check::new("gumbel from frechet at e", gumbel_from_frechet(core::f64::consts::E)?, 1.0, Absolute(1e-15)),
    ];
    let mut worst = 0.0f64;
    for p in [gumbel, frechet, GevParams::new(-1.0, 0.5, -0.2)?] {
        for i in 0..30 {
            let x = -1.0 + 0.1 * i as f64;
            let pdf = gev_pdf(x, &p)?;
            if pdf > 1e-6 {
                let fd = d5(|t| gev_cdf(t, &p).unwrap_or(f64::NAN), x, 1e-4);
                worst = worst.max((fd - pdf).abs() / pdf);
            }
        }
    }
    out.push(Check::new("gev_pdf vs cdf difference (max rel)", worst, 0.0, Absolute(1e-6)));
    Ok(out)
}

/// Largest relative error of the analytic partials `V1`, `V2`, `V12`
/// against five-point differences over `{0.5,0.8,1.2,2,3}^2 x {0.5,1,2.5}`.
/// The ranges keep every partial well above the rounding noise of `V`.
pub fn exponent_partial_errors() -> Result<[f64; 3]> {
    let ys = [0.5, 0.8, 1.2, 2.0, 3.0];
    let mut worst = [0.0f64; 3];
    for &a in &[0.5, 1.0, 2.5] {
        let pd = PairDependence::new(a)?;
        let v = |p: f64, q: f64| smith_exponent(p, q, pd).map(|e| e.v).unwrap_or(f64::NAN);
        let v1 = |p: f64, q: f64| smith_exponent(p, q, pd).map(|e| e.v1).unwrap_or(f64::NAN);
        for &y1 in &ys {
            for &y2 in &ys {
                let e = smith_exponent(y1, y2, pd)?;
                let d1 = d5(|p| v(p, y2), y1, 1e-3 * y1);
                let d2 = d5(|q| v(y1, q), y2, 1e-3 * y2);
                let d12 = d5(|q| v1(y1, q), y2, 1e-3 * y2);
                for (k, (fd, an)) in [(d1, e.v1), (d2, e.v2), (d12, e.v12)].into_iter().enumerate() {
                    worst[k] = worst[k].max((fd - an).abs() / an.abs());
                }
            }
        }
    }
    Ok(worst)
}

fn maxstable() -> Result<Vec<Check>> {
    use Tolerance::*;
    let pd1 = PairDependence::new(1.0)?;
    let mut out = vec![
        Check::new("smith_cdf(1,1;a=1)", smith_cdf(1.0, 1.0, pd1)?, 0.250_843_780_377_747, Absolute(1e-14)),
        Check::new("smith V(1,1;a=1)", smith_exponent(1.0, 1.0, pd1)?.v, 1.382_924_922_548_026, Absolute(1e-14)),
        Check::new("smith_cdf a=0", smith_cdf(2.0, 3.0, PairDependence::new(0.0)?)?, (-0.5f64).exp(), Absolute(1e-15)),
        Check::new("schlather_cdf(1,1;rho=0)", schlather_cdf(1.0, 1.0, 0.0)?, 0.181_389_834_649_615_2, Absolute(1e-15)),
        Check::new("br_cdf(1,1;gamma=4)", br_cdf(1.0, 1.0, 4.0)?, 0.185_873_398_148_184_4, Absolute(1e-14)),
    ];
    let mut homog = 0.0f64;
    for &(y1, y2) in &[(0.3, 0.9), (1.0, 1.0), (7.0, 2.0)] {
        for &a in &[0.05, 1.0, 9.0] {
            let pd = PairDependence::new(a)?;
            let v = smith_exponent(y1, y2, pd)?.v;
            for &c in &[0.5, 2.0, 10.0] {
                homog = homog.max((smith_exponent(c * y1, c * y2, pd)?.v * c - v).abs());
            }
        }
    }
    out.push(Check::new("homogeneity c V(cy) = V(y) (max abs)", homog, 0.0, Absolute(1e-12)));
    let errs = exponent_partial_errors()?;
    for (name, e) in ["V1", "V2", "V12"].iter().zip(errs) {
        out.push(Check::new(format!("{name} vs finite difference (max rel)"), e, 0.0, Absolute(1e-5)));
    }
    Ok(out)
}

fn appendix_a() -> Result<Vec<Check>> {
    use Tolerance::*;
    let (a8, b8) = normalizing_constants(8f64.exp())?;
    let (a16, b16) = normalizing_constants(1e16)?;
    let mut out = vec![
        Check::new("a_t at t=e^8", a8, 0.25, Absolute(1e-15)),
        Check::new("b_t at t=e^8", b8, 3.423_691_776_418_859, Absolute(1e-12)),
        Check::new("|a_t b_t - 1| at t=1e16", (a16 * b16 - 1.0).abs(), 0.05, AtMost),
        Check::new("bvn_cdf(0,0,0)", bvn_cdf(0.0, 0.0, 0.0)?, 0.25, Absolute(1e-12)),
        Check::new("bvn_cdf(0,0,0.5)", bvn_cdf(0.0, 0.0, 0.5)?, 1.0 / 3.0, Absolute(1e-10)),
        Check::new("bvn_cdf(1.3,inf,0.4)", bvn_cdf(1.3, f64::INFINITY, 0.4)?, maxstable_core::math::std_normal_cdf(1.3), Absolute(1e-15)),
        Check::new("upper orthant (8.3,8.3,0.5)", bvn_upper_tail(8.3, 8.3, 0.5)?, 6.405_900_816_527_093e-23, Relative(1e-10)),
        Check::new("upper orthant (2,3,0.95)", bvn_upper_tail(2.0, 3.0, 0.95)?, 0.001_348_785_152_678_894, Relative(1e-10)),
    ];
    let grid = default_gap_grid();
    let ts = [1e4, 1e8, 1e16];
    for rho in [0.0, 0.5] {
        let means: Vec<f64> = ts
            .iter()
            .map(|&t| second_order_gap(rho, t, &grid, GapConvention::InverseLocation).map(|e| e.mean_abs_deviation()))
            .collect::<Result<_>>()?;
        for k in 1..means.len() {
            out.push(Check::new(
                format!("mean |gap/A - Psi| rho={rho}: t={:e} below t={:e}", ts[k], ts[k - 1]),
                means[k],
                means[k - 1],
                AtMost,
            ));
        }
        let env = envelope_check(rho, &ts, &grid, 1.0, 100.0)?;
        let ratio = env.points.iter().map(|p| p.product / p.envelope).fold(0.0, f64::max);
        out.push(Check::new(format!("envelope bound rho={rho} (max product/envelope)"), ratio, 1.0, AtMost));
    }
    Ok(out)
}

/// Smallest denominator in the Brown-Resnick relative errors.
pub const REL_FLOOR: f64 = 1e-6;

/// `(x, y, gamma)` grid for the Brown-Resnick derivative checks.
pub fn br_grid() -> Vec<(f64, f64, f64)> {
    let xs = [-0.8, 0.0, 0.3, 1.5];
    let gs = [0.6, 1.0, 1.7, 3.0];
    let mut out = Vec::new();
    for &x in &xs {
        for &y in &xs {
            for &g in &gs {
                out.push((x, y, g));
            }
        }
    }
    out
}

/// Largest relative error of each analytic `theta`-derivative against a
/// five-point difference in `gamma`, over [`br_grid`] with `M = 100`.
/// Order: `B_theta`, `B_x_theta` (k1, k2), `B_y_theta` (k1, k2),
/// `B_xy_theta` (k3), `J_theta`. Denominators are floored at
/// [`REL_FLOOR`] so that derivatives vanishing by symmetry are compared on
/// an absolute scale.
pub fn br_theta_errors() -> Result<[f64; 5]> {
    let m = 100.0;
    let mut worst = [0.0f64; 5];
    let pick: [fn(&BrDerivSet) -> f64; 5] = [|d| d.b, |d| d.b_x, |d| d.b_y, |d| d.b_xy, |d| d.j];
    let deriv: [fn(&BrDerivSet) -> f64; 5] =
        [|d| d.b_theta, |d| d.b_x_theta, |d| d.b_y_theta, |d| d.b_xy_theta, |d| d.j_theta];
    for (x, y, g) in br_grid() {
        let d = br_gumbel_derivs(x, y, g, 1.0, m)?;
        for k in 0..5 {
            let f = |gg: f64| br_gumbel_derivs(x, y, gg, 1.0, m).map(|d| pick[k](&d)).unwrap_or(f64::NAN);
            let fd = d5(f, g, 1e-3 * g);
            let an = deriv[k](&d);
            worst[k] = worst[k].max((fd - an).abs() / an.abs().max(REL_FLOOR));
        }
    }
    Ok(worst)
}

fn appendix_b() -> Result<Vec<Check>> {
    use Tolerance::*;
    let mut out = vec![Check::new("k2(0) at gamma=1", br_k2(0.0, 1.0), 0.625, Absolute(1e-15))];
    let names = [
        "dB/dtheta",
        "dB_x/dtheta (k1, k2)",
        "dB_y/dtheta (k1, k2)",
        "dB_xy/dtheta (k3)",
        "dJ/dtheta",
    ];
    for (name, e) in names.iter().zip(br_theta_errors()?) {
        out.push(Check::new(format!("{name} vs finite difference (max rel)"), e, 0.0, Absolute(1e-6)));
    }
    let mut worst = 0.0f64;
    for (x, y, g) in br_grid() {
        let d = br_gumbel_derivs(x, y, g, 1.0, 100.0)?;
        let bx = d5(|t| br_gumbel_derivs(t, y, g, 1.0, 100.0).map(|d| d.b).unwrap_or(f64::NAN), x, 1e-3);
        let bxy = d5(|t| br_gumbel_derivs(x, t, g, 1.0, 100.0).map(|d| d.b_x).unwrap_or(f64::NAN), y, 1e-3);
        worst = worst.max((bx - d.b_x).abs() / d.b_x.abs().max(REL_FLOOR)).max((bxy - d.b_xy).abs() / d.b_xy.abs().max(REL_FLOOR));
    }
    out.push(Check::new("B_x, B_xy vs finite difference (max rel)", worst, 0.0, Absolute(1e-6)));
    Ok(out)
}
