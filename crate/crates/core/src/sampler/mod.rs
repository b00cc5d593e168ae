//! Gaussian path sampling on grids and persistence estimation.

mod bounds;
mod fit;
mod ghk;
mod orthant;

pub use bounds::{slepian_product_bound, union_upper_bound};
pub use fit::{fit_exponent, FitMode, FitPoint, FitResult};
pub use ghk::{ghk_prefix, persist_ghk, persist_ghk_curve, PackedLower};
pub use orthant::{orthant_exact_small, orthant_exact_small_level};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, JITTER_CAP};
use crate::rng::replicate_stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Crude,
    SeqIs,
}

/// A probability estimate. `log_p` stays finite when `p_hat` would
/// underflow; `stderr` is absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub p_hat: f64,
    pub log_p: f64,
    pub stderr: f64,
    pub n: usize,
    pub method: Method,
    pub seed: u64,
    pub grid_size: usize,
}

impl MCEstimate {
    /// stderr / p_hat, computed in log space.
    pub fn rel_stderr(&self) -> f64 {
        if self.stderr == 0.0 {
            0.0
        } else {
            (self.stderr.ln() - self.log_p).exp()
        }
    }

    /// Standard error of log p̂ by the delta method.
    pub fn log_stderr(&self) -> f64 {
        self.rel_stderr()
    }
}

/// How paths were generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Circulant,
    Cholesky,
}

/// `n` sampled paths on an `m`-point grid, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub n: usize,
    pub m: usize,
    pub values: Vec<f64>,
    pub route: Route,
}

impl Paths {
    pub fn path(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }
}

/// Replicates are reduced in fixed-size chunks so that parallel results
/// do not depend on the number of worker threads.
pub(crate) const CHUNK: usize = 1024;

pub(crate) fn chunks(n: usize) -> Vec<std::ops::Range<usize>> {
    (0..n.div_ceil(CHUNK)).map(|c| c * CHUNK..((c + 1) * CHUNK).min(n)).collect()
}

fn is_uniform(grid: &[f64]) -> bool {
    if grid.len() < 3 {
        return grid.len() == 2;
    }
    let h = grid[1] - grid[0];
    grid.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h)
}

/// Path generator for one kernel on one grid.
pub(crate) enum Generator {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>>, m: usize },
    Cholesky(PackedLower),
}

impl Generator {
    pub(crate) fn new(k: &Kernel, grid: &[f64]) -> Result<Self> {
        if k.is_stationary() && grid.len() > 2 && is_uniform(grid) {
            if let Some(g) = Self::circulant(k, grid)? {
                return Ok(g);
            }
        }
        let gram = k.gram(grid, JITTER_CAP)?;
        Ok(Generator::Cholesky(PackedLower::from_matrix(&gram.cholesky)))
    }

    /// Circulant embedding of the first row; `None` when the embedding has
    /// eigenvalues below −1e−10 relative to the largest.
    fn circulant(k: &Kernel, grid: &[f64]) -> Result<Option<Self>> {
        let m = grid.len();
        let h = grid[1] - grid[0];
        let size = (2 * (m - 1)).next_power_of_two();
        let mut row = vec![Complex64::new(0.0, 0.0); size];
        for (j, slot) in row.iter_mut().enumerate() {
            let lag = j.min(size - j) as f64 * h;
            *slot = Complex64::new(k.stationary_corr(lag)?, 0.0);
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(size);
        fft.process(&mut row);
        let max = row.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
        if row.iter().any(|c| c.re < -1e-10 * max) {
            return Ok(None);
        }
        let sqrt_eig = row.iter().map(|c| (c.re.max(0.0) / size as f64).sqrt()).collect();
        Ok(Some(Generator::Circulant { sqrt_eig, fft, m }))
    }

    pub(crate) fn route(&self) -> Route {
        match self {
            Generator::Circulant { .. } => Route::Circulant,
            Generator::Cholesky(_) => Route::Cholesky,
        }
    }

    /// Fills `out` with one path.
    pub(crate) fn draw(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            Generator::Circulant { sqrt_eig, fft, m } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
                        Complex64::new(s * a, s * b)
                    })
                    .collect();
                fft.process(&mut buf);
                for (o, c) in out.iter_mut().zip(&buf[..*m]) {
                    *o = c.re;
                }
            }
            Generator::Cholesky(l) => {
                let z: Vec<f64> = (0..l.dim()).map(|_| rng.sample(StandardNormal)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    *o = l.row(i).iter().zip(&z).map(|(a, b)| a * b).sum();
                }
            }
        }
    }

    /// Index of the first grid point at or above `level` on a freshly drawn
    /// path, `None` if the path stays below. The Cholesky route stops
    /// drawing at the first exceedance.
    fn first_exceedance(&self, rng: &mut ChaCha8Rng, level: f64, scratch: &mut Vec<f64>) -> Option<usize> {
        match self {
            Generator::Cholesky(l) => {
                scratch.clear();
                for i in 0..l.dim() {
                    scratch.push(rng.sample(StandardNormal));
                    let x: f64 = l.row(i).iter().zip(scratch.iter()).map(|(a, b)| a * b).sum();
                    if x >= level {
                        return Some(i);
                    }
                }
                None
            }
            Generator::Circulant { m, .. } => {
                scratch.resize(*m, 0.0);
                self.draw(rng, scratch);
                scratch.iter().position(|&x| x >= level)
            }
        }
    }
}

/// Draws `n` paths of the process with kernel `k` on `grid`.
pub fn sample(k: &Kernel, grid: &[f64], n: usize, seed: u64) -> Result<Paths> {
    let g = Generator::new(k, grid)?;
    let m = grid.len();
    let mut values = vec![0.0; n * m];
    values.par_chunks_mut(m.max(1)).enumerate().for_each(|(i, out)| {
        let mut rng = replicate_stream(seed, i as u64);
        g.draw(&mut rng, out);
    });
    Ok(Paths { n, m, values, route: g.route() })
}

/// Wilson-score half-width at z = 1, used as the standard error of a
/// binomial proportion.
pub fn wilson_stderr(successes: usize, n: usize) -> f64 {
    let nf = n as f64;
    let p = successes as f64 / nf;
    (p * (1.0 - p) / nf + 0.25 / (nf * nf)).sqrt() / (1.0 + 1.0 / nf)
}

/// Crude Monte Carlo estimate of P(max over grid < level).
pub fn persist_mc(k: &Kernel, grid: &[f64], level: f64, n: usize, seed: u64) -> Result<MCEstimate> {
    let last = *persist_mc_curve(k, grid, level, n, seed)?.last().ok_or_else(|| Error::invalid("empty grid"))?;
    if last.p_hat == 0.0 {
        return Err(Error::AllExceeded);
    }
    Ok(last)
}

/// Crude estimates of P(max over grid[..=j] < level) for every prefix j,
/// from one set of paths. Prefixes with no surviving path report
/// `p_hat = 0` and `log_p = −∞`.
pub fn persist_mc_curve(k: &Kernel, grid: &[f64], level: f64, n: usize, seed: u64) -> Result<Vec<MCEstimate>> {
    if n == 0 {
        return Err(Error::invalid("need at least one replicate"));
    }
    let m = grid.len();
    let g = Generator::new(k, grid)?;
    // killed[j] = number of paths whose first exceedance is at j
    let killed = chunks(n)
        .into_par_iter()
        .map(|r| {
            let mut scratch = Vec::with_capacity(m);
            let mut c = vec![0usize; m];
            for i in r {
                if let Some(j) = g.first_exceedance(&mut replicate_stream(seed, i as u64), level, &mut scratch) {
                    c[j] += 1;
                }
            }
            c
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(vec![0usize; m], |mut a, c| {
            a.iter_mut().zip(c).for_each(|(a, c)| *a += c);
            a
        });
    let mut alive = n;
    Ok(killed
        .iter()
        .enumerate()
        .map(|(j, &kj)| {
            alive -= kj;
            let p = alive as f64 / n as f64;
            MCEstimate {
                p_hat: p,
                log_p: p.ln(),
                stderr: wilson_stderr(alive, n),
                n,
                method: Method::Crude,
                seed,
                grid_size: j + 1,
            }
        })
        .collect())
}

/// Monte Carlo mean of sup over `points` equispaced times in [s, s+u].
/// Returns (mean, stderr).
pub fn expected_sup(k: &Kernel, s: f64, u: f64, points: usize, n: usize, seed: u64) -> Result<(f64, f64)> {
    if u == 0.0 || points <= 1 {
        return Ok((0.0, 0.0));
    }
    if points < 51 {
        return Err(Error::invalid("subgrid step must be at most u/50 (51 points)"));
    }
    let grid: Vec<f64> = (0..points).map(|i| s + u * i as f64 / (points - 1) as f64).collect();
    let paths = sample(k, &grid, n, seed)?;
    let maxima: Vec<f64> = (0..n).map(|i| paths.path(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    Ok(mean_stderr(&maxima))
}

pub(crate) fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_matches_binomial_for_large_n() {
        let se = wilson_stderr(5000, 10_000);
        assert!((se - 0.005).abs() < 1e-6);
        assert!(wilson_stderr(0, 10) > 0.0);
    }

    #[test]
    fn circulant_route_is_used_for_uniform_stationary_grids() {
        let grid: Vec<f64> = (0..64).map(|i| 0.1 * i as f64).collect();
        let p = sample(&Kernel::ou(1.0).unwrap(), &grid, 4, 1).unwrap();
        assert_eq!(p.route, Route::Circulant);
        let q = sample(&Kernel::ou(1.0).unwrap(), &[0.0, 0.3, 1.0], 4, 1).unwrap();
        assert_eq!(q.route, Route::Cholesky);
    }
}
