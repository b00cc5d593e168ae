//! Configuration-driven experiments: TOML specs in, report rows out as CSV
//! and JSON.
//!
//! CSV schema (fixed): `experiment,T,p_hat,log_p,stderr,regressor,ratio`,
//! one row per horizon in increasing T. `stderr` is the absolute standard
//! error of `p_hat`; `ratio` is `−log_p / regressor`.

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::langevin::{self, LangevinConfig};
use crate::rv::RegVarFn;
use crate::sampler::{self, fit_exponent, FitMode, FitPoint, FitResult, MCEstimate, Method};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const CSV_HEADER: [&str; 7] = ["experiment", "T", "p_hat", "log_p", "stderr", "regressor", "ratio"];

/// Uniform or geometric grid on [t0, t1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t0: f64,
    pub t1: f64,
    #[serde(default)]
    pub step: Option<f64>,
    /// Step in log t (geometric grid).
    #[serde(default)]
    pub log_step: Option<f64>,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.t1 > self.t0) {
            return Err(Error::InvalidSpec(format!("grid needs t1 > t0, got [{}, {}]", self.t0, self.t1)));
        }
        match (self.step, self.log_step) {
            (Some(h), None) if h > 0.0 => {
                let m = ((self.t1 - self.t0) / h).round() as usize;
                Ok((0..=m).map(|i| self.t0 + i as f64 * h).collect())
            }
            (None, Some(h)) if h > 0.0 && self.t0 > 0.0 => {
                let (a, b) = (self.t0.ln(), self.t1.ln());
                let m = ((b - a) / h).round() as usize;
                Ok((0..=m).map(|i| (a + i as f64 * h).exp()).collect())
            }
            _ => Err(Error::InvalidSpec("grid needs exactly one positive `step` or `log_step` (log_step needs t0 > 0)".into())),
        }
    }

    fn halved(&self) -> GridSpec {
        GridSpec { step: self.step.map(|h| h / 2.0), log_step: self.log_step.map(|h| h / 2.0), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    pub method: Method,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    #[serde(flatten)]
    pub mode: FitMode,
    /// Horizons T at which persistence over [t0, T] is reported.
    pub t_list: Vec<f64>,
}

/// Either a kernel-based persistence run or a Langevin run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Kernel(Kernel),
    Langevin(LangevinConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(flatten)]
    pub source: Source,
    /// Required for kernel sources; Langevin runs record every step.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub estimator: EstimatorSpec,
    pub fit: FitSpec,
    /// Number of grid halvings for the step-size stabilization rule.
    #[serde(default)]
    pub refine: usize,
}

/// Top-level TOML document: a list of `[[experiment]]` tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecFile {
    pub experiment: Vec<ExperimentSpec>,
}

impl SpecFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        let f: SpecFile = toml::from_str(text)?;
        for e in &f.experiment {
            e.validate()?;
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let ctx = |e: Error| Error::Experiment { name: self.name.clone(), source: Box::new(e) };
        let t = &self.fit.t_list;
        if t.is_empty() {
            return Err(ctx(Error::InvalidSpec("empty T-list".into())));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ctx(Error::InvalidSpec("T-list must be strictly increasing".into())));
        }
        match &self.source {
            Source::Kernel(_) => {
                let g = self.grid.as_ref().ok_or_else(|| ctx(Error::InvalidSpec("kernel runs need a grid".into())))?;
                g.points().map_err(ctx)?;
                if t[0] < g.t0 || *t.last().unwrap() > g.t1 + 1e-9 {
                    return Err(ctx(Error::InvalidSpec("T-list must lie inside the grid".into())));
                }
            }
            Source::Langevin(cfg) => {
                cfg.validate().map_err(ctx)?;
                if *t.last().unwrap() > cfg.t_max + 1e-9 {
                    return Err(ctx(Error::InvalidSpec("T-list exceeds t_max".into())));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    #[serde(rename = "T")]
    pub t: f64,
    pub p_hat: f64,
    pub log_p: f64,
    pub stderr: f64,
    pub regressor: f64,
    pub ratio: f64,
}

/// Fit at one grid resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelFit {
    pub step: Option<f64>,
    pub fit: Option<FitResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    /// Rows at the finest resolution.
    pub rows: Vec<ReportRow>,
    /// One entry per resolution, coarsest first.
    pub fits: Vec<LevelFit>,
    /// Slopes extrapolated to step 0 assuming an O(√h) grid bias, from
    /// each consecutive pair of resolutions.
    pub extrapolated: Vec<f64>,
}

/// Estimates over [t0, T] for every T in the list, from one pass.
fn estimates(spec: &ExperimentSpec, grid: Option<&GridSpec>) -> Result<Vec<MCEstimate>> {
    let ts = &spec.fit.t_list;
    let est = &spec.estimator;
    match &spec.source {
        Source::Kernel(k) => {
            let g = grid.expect("validated").points()?;
            let t_max = *ts.last().unwrap();
            let pts: Vec<f64> = g.into_iter().filter(|&t| t <= t_max * (1.0 + 1e-12) + 1e-12).collect();
            let curve = match est.method {
                Method::SeqIs => sampler::persist_ghk_curve(k, &pts, est.level, est.n, est.seed)?,
                Method::Crude => sampler::persist_mc_curve(k, &pts, est.level, est.n, est.seed)?,
            };
            ts.iter()
                .map(|&t| {
                    let i = pts.iter().rposition(|&x| x <= t * (1.0 + 1e-12) + 1e-12).expect("T inside grid");
                    Ok(curve[i])
                })
                .collect()
        }
        Source::Langevin(cfg) => {
            let t0 = cfg.interval.map_or(1.0, |(a, _)| a);
            let mut cfg = cfg.clone();
            cfg.seed = est.seed;
            cfg.replicates = est.n;
            langevin::run_persistence_curve(&cfg, t0, ts)
        }
    }
}

fn rows(spec: &ExperimentSpec, est: &[MCEstimate]) -> Result<Vec<ReportRow>> {
    spec.fit
        .t_list
        .iter()
        .zip(est)
        .map(|(&t, e)| {
            let regressor = spec.fit.mode.regressor(t)?;
            Ok(ReportRow {
                experiment: spec.name.clone(),
                t,
                p_hat: e.p_hat,
                log_p: e.log_p,
                stderr: e.stderr,
                regressor,
                ratio: -e.log_p / regressor,
            })
        })
        .collect()
}

fn fit_rows(spec: &ExperimentSpec, est: &[MCEstimate]) -> Option<FitResult> {
    let pts: Vec<FitPoint> = spec
        .fit
        .t_list
        .iter()
        .zip(est)
        .map(|(&t, e)| FitPoint { t, log_p: e.log_p, stderr: e.rel_stderr() })
        .collect();
    fit_exponent(&pts, &spec.fit.mode).ok()
}

/// Runs one experiment. Deterministic given its definition.
pub fn run(spec: &ExperimentSpec) -> Result<Report> {
    let ctx = |e: Error| Error::Experiment { name: spec.name.clone(), source: Box::new(e) };
    spec.validate()?;
    let mut grid = spec.grid.clone();
    let mut fits = Vec::new();
    let mut last = Vec::new();
    for _ in 0..=spec.refine {
        let est = estimates(spec, grid.as_ref()).map_err(ctx)?;
        fits.push(LevelFit { step: grid.as_ref().and_then(|g| g.step.or(g.log_step)), fit: fit_rows(spec, &est) });
        last = est;
        grid = grid.map(|g| g.halved());
    }
    let extrapolated = fits
        .windows(2)
        .filter_map(|w| match (&w[0].fit, &w[1].fit) {
            (Some(a), Some(b)) => Some(sqrt_h_extrapolate(a.slope, b.slope)),
            _ => None,
        })
        .collect();
    Ok(Report { name: spec.name.clone(), rows: rows(spec, &last).map_err(ctx)?, fits, extrapolated })
}

/// Limit at h → 0 of s(h) = s₀ + c√h from s(h) and s(h/2).
pub fn sqrt_h_extrapolate(s_h: f64, s_half: f64) -> f64 {
    let r = std::f64::consts::SQRT_2;
    (r * s_half - s_h) / (r - 1.0)
}

pub fn write_csv<W: std::io::Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Newell–Rosenblatt style envelopes c·T^α and c·T^α·log T (α < 1) or
/// c·T/log T and c·T (α = 1), with c = 1, next to a_ρ(T).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRow {
    #[serde(rename = "T")]
    pub t: f64,
    pub a_rho: f64,
    pub lower: f64,
    pub upper: f64,
}

pub fn envelope_tables(t_list: &[f64], rho: &RegVarFn) -> Result<Vec<EnvelopeRow>> {
    let a = rho.alpha();
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::invalid(format!("envelopes need alpha in (0, 1], got {a}")));
    }
    t_list
        .iter()
        .map(|&t| {
            let (lower, upper) = if a < 1.0 { (t.powf(a), t.powf(a) * t.ln()) } else { (t / t.ln(), t) };
            Ok(EnvelopeRow { t, a_rho: rho.decay_rate(t)?, lower, upper })
        })
        .collect()
}
