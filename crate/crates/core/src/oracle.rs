//! Closed-form and brute-force reference values.
//!
//! Nothing here calls into the estimators or kernels it is used to check;
//! the verification suites and tests rely on that independence.

use statrs::function::gamma::ln_gamma;
use std::f64::consts::{FRAC_1_PI, PI};

/// e^{−u} I₀(u) = Σ_m e^{−u} (u/2)^{2m} / (m!)², the return probability of
/// the continuous-time simple random walk on Z at time `u`.
pub fn bessel_return_1d(u: f64) -> f64 {
    if u == 0.0 {
        return 1.0;
    }
    let half_log = (0.5 * u).ln();
    let mut sum = 0.0;
    let mut m = 0u32;
    loop {
        let mf = f64::from(m);
        let term = (-u + 2.0 * mf * half_log - 2.0 * ln_gamma(mf + 1.0)).exp();
        sum += term;
        if mf > 0.5 * u + 5.0 && term < 1e-18 * sum {
            break;
        }
        m += 1;
    }
    sum
}

/// P(S_u = 0) for the continuous-time simple random walk on Z^d: the
/// coordinates are independent one-dimensional walks run at rate 1/d.
pub fn srw_return_ct(d: usize, u: f64) -> f64 {
    bessel_return_1d(u / d as f64).powi(d as i32)
}

/// P(Z(t) < 0 for all t ∈ [0, T]) for the stationary OU process of unit
/// rate, from the time change Z(t) = e^{−t} W(e^{2t}) and the arcsine law.
pub fn ou_persistence(t: f64) -> f64 {
    FRAC_1_PI * (-t).exp().asin()
}

/// P(X₁ < 0, X₂ < 0) for standard normals of correlation `r`.
pub fn orthant2(r: f64) -> f64 {
    0.25 + r.asin() / (2.0 * PI)
}

/// P(X₁ < 0, X₂ < 0, X₃ < 0) for a trivariate standard normal.
pub fn orthant3(r12: f64, r13: f64, r23: f64) -> f64 {
    0.125 + (r12.asin() + r13.asin() + r23.asin()) / (4.0 * PI)
}

/// Exact persistence of the OU(θ) chain observed on a grid of step `h`
/// with `points` grid points, P(X₀ < level, …, X_{points−1} < level), by
/// iterating the Gaussian transfer operator on a midpoint grid.
pub fn ou_grid_persistence(theta: f64, h: f64, points: usize, level: f64, nx: usize) -> Vec<f64> {
    let a = (-theta * h).exp();
    let s = (1.0 - a * a).sqrt();
    let lo = level.min(0.0) - 9.0;
    let dx = (level - lo) / nx as f64;
    let xs: Vec<f64> = (0..nx).map(|i| lo + (i as f64 + 0.5) * dx).collect();
    let norm = 1.0 / (s * (2.0 * PI).sqrt());
    let band = ((10.0 * s) / dx).ceil() as isize + 1;
    let mut dens: Vec<f64> = xs.iter().map(|x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt()).collect();
    let mut out = Vec::with_capacity(points);
    out.push(dens.iter().sum::<f64>() * dx);
    let mut next = vec![0.0; nx];
    for _ in 1..points {
        for (i, slot) in next.iter_mut().enumerate() {
            let xi = xs[i];
            // source points y with |xi − a·y| small: y ≈ xi / a
            let centre = (((xi / a) - lo) / dx - 0.5).round() as isize;
            let span = (band as f64 / a).ceil() as isize;
            let (j0, j1) = ((centre - span).max(0), (centre + span).min(nx as isize - 1));
            let mut acc = 0.0;
            for j in j0..=j1 {
                let z = (xi - a * xs[j as usize]) / s;
                acc += dens[j as usize] * (-0.5 * z * z).exp();
            }
            *slot = acc * norm * dx;
        }
        std::mem::swap(&mut dens, &mut next);
        out.push(dens.iter().sum::<f64>() * dx);
    }
    out
}
