use crate::error::{Error, Result};
use crate::rv::RegVarFn;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Regressor for −log p(T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FitMode {
    PerT,
    PerLogT,
    PerARho { rho: RegVarFn },
}

impl FitMode {
    pub fn regressor(&self, t: f64) -> Result<f64> {
        match self {
            FitMode::PerT => Ok(t),
            FitMode::PerLogT => Ok(t.ln()),
            FitMode::PerARho { rho } => rho.decay_rate(t),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FitMode::PerT => "per_t",
            FitMode::PerLogT => "per_log_t",
            FitMode::PerARho { .. } => "per_a_rho",
        }
    }
}

/// One measured point: horizon T, log p̂(T) and the standard error of
/// log p̂ (zero for analytic values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub t: f64,
    pub log_p: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mode: String,
    pub slope: f64,
    pub intercept: f64,
    pub ci_95: [f64; 2],
    pub window: [f64; 2],
    /// min and max of −log p(T)/regressor(T); reported for `per_a_rho`.
    pub ratio_range: Option<[f64; 2]>,
}

/// Weighted least squares of −log p against the mode's regressor.
/// Weights are inverse variances when every point has a positive
/// standard error, uniform otherwise.
pub fn fit_exponent(points: &[FitPoint], mode: &FitMode) -> Result<FitResult> {
    let mut ts: Vec<f64> = points.iter().map(|p| p.t).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    if ts.len() < 4 {
        return Err(Error::DegenerateRegressor(format!("{} distinct horizons, need at least 4", ts.len())));
    }
    let x: Vec<f64> = points.iter().map(|p| mode.regressor(p.t)).collect::<Result<_>>()?;
    let y: Vec<f64> = points.iter().map(|p| -p.log_p).collect();
    let w: Vec<f64> = if points.iter().all(|p| p.stderr > 0.0) {
        points.iter().map(|p| 1.0 / (p.stderr * p.stderr)).collect()
    } else {
        vec![1.0; points.len()]
    };
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - xm).powi(2)).sum();
    let spread = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - x.iter().copied().fold(f64::INFINITY, f64::min);
    if !(sxx > 0.0) || !(spread > 1e-12 * xm.abs().max(1.0)) {
        return Err(Error::DegenerateRegressor("regressor has no spread".into()));
    }
    let sxy: f64 = w.iter().zip(&x).zip(&y).map(|((w, x), y)| w * (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let dof = (points.len() - 2) as f64;
    let rss: f64 = w.iter().zip(&x).zip(&y).map(|((w, x), y)| w * (y - intercept - slope * x).powi(2)).sum();
    let se = (rss / dof / sxx).sqrt();
    let tq = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::invalid(e.to_string()))?.inverse_cdf(0.975);
    let ratio_range = match mode {
        FitMode::PerARho { .. } => {
            let r: Vec<f64> = y.iter().zip(&x).map(|(y, x)| y / x).collect();
            Some([
                r.iter().copied().fold(f64::INFINITY, f64::min),
                r.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ])
        }
        _ => None,
    };
    Ok(FitResult {
        mode: mode.name().to_string(),
        slope,
        intercept,
        ci_95: [slope - tq * se, slope + tq * se],
        window: [ts[0], *ts.last().unwrap()],
        ratio_range,
    })
}
