use crate::error::{Error, Result};
use crate::normal::{cdf, pdf};
use crate::quad;
use nalgebra::{Cholesky, DMatrix};
use std::f64::consts::PI;

/// Below this the standard normal density is zero in double precision.
const LOWER: f64 = -38.5;

/// P(X_i < 0 for all i) for a correlation matrix of dimension ≤ 3.
pub fn orthant_exact_small(corr: &DMatrix<f64>) -> Result<f64> {
    orthant_exact_small_level(corr, 0.0)
}

/// P(X_i < level for all i), dimension ≤ 3. Dimension 3 conditions on X₁
/// and integrates the bivariate conditional probability, itself a 1-D
/// integral, so the result is a nested adaptive quadrature.
pub fn orthant_exact_small_level(corr: &DMatrix<f64>, level: f64) -> Result<f64> {
    let n = corr.nrows();
    if n != corr.ncols() || n == 0 {
        return Err(Error::invalid("correlation matrix must be square and non-empty"));
    }
    if n > 3 {
        return Err(Error::unsupported(format!("exact orthant probability in dimension {n} > 3")));
    }
    if Cholesky::new(corr.clone()).is_none() {
        return Err(Error::NotPositiveDefinite { cap: 0.0 });
    }
    match n {
        1 => Ok(cdf(level)),
        2 if level == 0.0 => Ok(0.25 + corr[(0, 1)].asin() / (2.0 * PI)),
        2 => bivariate(level, level, corr[(0, 1)]),
        _ => {
            let (r12, r13, r23) = (corr[(0, 1)], corr[(0, 2)], corr[(1, 2)]);
            let (s2, s3) = ((1.0 - r12 * r12).sqrt(), (1.0 - r13 * r13).sqrt());
            let rc = (r23 - r12 * r13) / (s2 * s3);
            let inner = |x: f64| {
                let a = (level - r12 * x) / s2;
                let b = (level - r13 * x) / s3;
                pdf(x) * bivariate(a, b, rc).unwrap_or(f64::NAN)
            };
            Ok(quad::integrate(inner, LOWER, level, 1e-10)?.value.clamp(0.0, 1.0))
        }
    }
}

/// P(Y₁ < a, Y₂ < b) for standard normals of correlation r.
fn bivariate(a: f64, b: f64, r: f64) -> Result<f64> {
    let s = (1.0 - r * r).sqrt();
    if s < 1e-12 {
        return Ok(if r > 0.0 { cdf(a.min(b)) } else { (cdf(a) + cdf(b) - 1.0).max(0.0) });
    }
    if a <= LOWER {
        return Ok(0.0);
    }
    let v = quad::integrate(|y: f64| pdf(y) * cdf((b - r * y) / s), LOWER, a, 1e-12)?.value;
    Ok(v.clamp(0.0, 1.0))
}
