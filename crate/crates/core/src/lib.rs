//! Threshold-censored pairwise composite likelihood for spatial max-stable
//! processes.
//!
//! The crate is `no_std` (it needs `alloc`) and covers the numerical side of
//! the method: univariate extreme-value margins, bivariate max-stable
//! dependence models, the stochastic sampling design of stations, exact
//! simulation of the Smith (Gaussian extreme value) process, the four-case
//! censored pair likelihood, a Nelder-Mead fit in log-Cholesky coordinates and
//! the Monte Carlo study machinery (sandwich bias and variance, MSE sweeps,
//! extremal coefficient layers, second-order expansion checks).
//!
//! IO, file formats, configuration and the command line live in the
//! `maxstable-cli` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod asymptotics;
pub mod design;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod likelihood;
pub mod linalg;
pub mod margins;
pub mod math;
pub mod maxstable;
pub mod optim;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use maxstable::SmithParams;
