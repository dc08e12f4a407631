//! Standard normal cdf and quantile.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Inverse of [`cdf`] on (0, 1); returns -inf / +inf at 0 / 1.
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    Normal::standard().inverse_cdf(p)
}
