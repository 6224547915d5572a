//! Large-sample behaviour of the censored composite likelihood estimator and
//! numerical checks of the second-order tail expansion it relies on.

mod second_order;
mod study;

pub use second_order::*;
pub use study::*;
