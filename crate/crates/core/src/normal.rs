//! Standard normal distribution helpers accurate in the far tails.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

/// Φ(x).
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// log Φ(x), finite for every finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return cdf(x).ln();
    }
    // Mills-ratio expansion: Φ(x) = φ(x)/|x| · (1 − 1/x² + 3/x⁴ − 15/x⁶ + …)
    let x2 = x * x;
    let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}

/// Φ⁻¹(p) for p ∈ (0, 1).
pub fn quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Density φ(x).
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Draws from N(0,1) conditioned on `z < upper` by inversion, given a
/// uniform `u ∈ (0,1)`. Returns the draw and `log Φ(upper)`.
pub fn truncated_below(upper: f64, u: f64) -> (f64, f64) {
    if upper == f64::INFINITY {
        return (quantile(u), 0.0);
    }
    let log_mass = log_cdf(upper);
    let log_p = u.ln() + log_mass;
    let z = if log_p > -std::f64::consts::LN_2 {
        // upper half: invert the complement (1 − u) + uΦ(−b) to keep precision
        -quantile((1.0 - u) + u * cdf(-upper))
    } else if log_p > -700.0 {
        quantile(log_p.exp())
    } else {
        // leading-order tail inversion of log Φ(x) = log p
        let l = -2.0 * log_p;
        -(l - l.ln() - (2.0 * std::f64::consts::PI).ln()).sqrt()
    };
    (z.min(upper), log_mass)
}
