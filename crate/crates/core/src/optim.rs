//! Nelder-Mead simplex minimisation.

use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Spread of objective values across the simplex.
    pub tol_f: f64,
    /// Largest coordinate distance of any vertex from the best one.
    pub tol_x: f64,
    /// Edge length of the initial simplex along each axis.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { max_evals: 2000, tol_f: 1e-8, tol_x: 1e-6, step: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub evals: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `f` from `x0`. Non-finite objective values count as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.step;
        simplex.push(v);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|x| eval(x, &mut evals)).collect();
    let mut order: Vec<usize> = (0..=n).collect();

    loop {
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]).then(a.cmp(&b)));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let spread = fv[worst] - fv[best];
        let diam = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if fv[best].is_finite() && spread <= opts.tol_f && diam <= opts.tol_x {
            return NelderMeadResult { x: simplex[best].clone(), fx: fv[best], evals, converged: true };
        }
        if evals >= opts.max_evals {
            return NelderMeadResult { x: simplex[best].clone(), fx: fv[best], evals, converged: false };
        }

        let mut centroid = alloc::vec![0.0; n];
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[worst]).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = along(REFLECT);
        let fr = eval(&xr, &mut evals);
        if fr < fv[best] {
            let xe = along(EXPAND);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[worst] = xe;
                fv[worst] = fe;
            } else {
                simplex[worst] = xr;
                fv[worst] = fr;
            }
            continue;
        }
        if fr < fv[second_worst] {
            simplex[worst] = xr;
            fv[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < fv[worst] {
            let xc = along(CONTRACT * REFLECT);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-CONTRACT);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < fv[worst].min(fr) {
            simplex[worst] = xc;
            fv[worst] = fc;
            continue;
        }
        let xb = simplex[best].clone();
        for &k in &order[1..] {
            let shrunk: Vec<f64> = simplex[k].iter().zip(&xb).map(|(x, b)| b + SHRINK * (x - b)).collect();
            fv[k] = eval(&shrunk, &mut evals);
            simplex[k] = shrunk;
        }
    }
}
