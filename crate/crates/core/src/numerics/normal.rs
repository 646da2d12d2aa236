use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn std_normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF, via the complementary error function so both tails
/// keep full relative precision.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`std_normal_cdf`] on the open unit interval.
///
/// The `erfc_inv` starting value is polished with two Halley steps against
/// the CDF itself, so `std_normal_cdf(std_normal_quantile(p))` reproduces `p`
/// to rounding.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    let mut x = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    for _ in 0..2 {
        let err = std_normal_cdf(x) - p;
        let density = std_normal_pdf(x);
        if density == 0.0 || err == 0.0 {
            break;
        }
        let step = err / density;
        x -= step / (1.0 + 0.5 * x * step);
    }
    Ok(x)
}
