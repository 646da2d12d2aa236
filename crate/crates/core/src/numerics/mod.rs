//! Numerical kernels: least squares, probit maximum likelihood, the standard
//! normal distribution and reproducible random streams.
//!
//! Everything here is a pure function of its inputs.

mod least_squares;
pub mod normal;
mod probit;
mod rng;

pub use least_squares::{solve_least_squares, DesignMatrix, LeastSquaresFit};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub use probit::{fit_probit, probit_log_likelihood, probit_score, ProbitFit, PROB_CLAMP};
pub use rng::RngStream;
