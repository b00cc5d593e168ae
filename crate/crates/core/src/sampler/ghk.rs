//! Sequential-conditioning importance sampler (GHK) for orthant
//! probabilities P(X_i < level for all i), X = L z.
//!
//! Coordinate i is drawn from the standard normal truncated to
//! z_i < (level − Σ_{j<i} L_ij z_j)/L_ii and the weight is multiplied by
//! that truncation mass. The running log weight after coordinate i is an
//! unbiased estimate of the persistence probability of the first i + 1
//! grid points, so one pass yields the whole prefix curve.

use super::{chunks, MCEstimate, Method};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, JITTER_CAP};
use crate::normal::truncated_below;
use crate::rng::replicate_stream;
use nalgebra::DMatrix;
use rand::distr::Open01;
use rand::Rng;
use rayon::prelude::*;

/// Row-major packed lower-triangular matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedLower {
    n: usize,
    data: Vec<f64>,
}

impl PackedLower {
    pub fn from_matrix(l: &DMatrix<f64>) -> Self {
        let n = l.nrows();
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                data.push(l[(i, j)]);
            }
        }
        PackedLower { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.data[start..start + i + 1]
    }
}

/// Log-space accumulator of Σw and Σw² for a stream of log weights.
#[derive(Debug, Clone, Copy)]
struct LogMoments {
    shift: f64,
    s1: f64,
    s2: f64,
}

impl LogMoments {
    const EMPTY: LogMoments = LogMoments { shift: f64::NEG_INFINITY, s1: 0.0, s2: 0.0 };

    fn push(&mut self, lw: f64) {
        if lw > self.shift {
            let r = (self.shift - lw).exp();
            self.s1 = self.s1 * r + 1.0;
            self.s2 = self.s2 * r * r + 1.0;
            self.shift = lw;
        } else {
            let r = (lw - self.shift).exp();
            self.s1 += r;
            self.s2 += r * r;
        }
    }

    fn merge(self, o: LogMoments) -> LogMoments {
        if o.shift == f64::NEG_INFINITY {
            return self;
        }
        if self.shift == f64::NEG_INFINITY {
            return o;
        }
        let shift = self.shift.max(o.shift);
        let (a, b) = ((self.shift - shift).exp(), (o.shift - shift).exp());
        LogMoments { shift, s1: self.s1 * a + o.s1 * b, s2: self.s2 * a * a + o.s2 * b * b }
    }

    fn estimate(&self, n: usize, seed: u64, grid_size: usize) -> MCEstimate {
        let nf = n as f64;
        let m1 = self.s1 / nf;
        let m2 = self.s2 / nf;
        let var_rel = ((m2 - m1 * m1).max(0.0) / (nf - 1.0).max(1.0)).sqrt();
        let log_p = self.shift + m1.ln();
        let stderr = if var_rel == 0.0 { 0.0 } else { (self.shift + var_rel.ln()).exp() };
        MCEstimate { p_hat: log_p.exp(), log_p, stderr, n, method: Method::SeqIs, seed, grid_size }
    }
}

/// GHK estimates of P(X_0 < level, …, X_k < level) for every prefix k.
pub fn ghk_prefix(l: &PackedLower, level: f64, n: usize, seed: u64) -> Result<Vec<MCEstimate>> {
    let m = l.dim();
    if n < 2 {
        return Err(Error::invalid("need at least two replicates"));
    }
    if (0..m).any(|i| !(l.row(i)[i] > 0.0)) {
        return Err(Error::invalid("Cholesky factor has a non-positive diagonal"));
    }
    let per_chunk: Vec<Vec<LogMoments>> = chunks(n)
        .into_par_iter()
        .map(|range| {
            let mut acc = vec![LogMoments::EMPTY; m];
            let mut z = vec![0.0; m];
            for rep in range {
                let mut rng = replicate_stream(seed, rep as u64);
                let mut lw = 0.0;
                for i in 0..m {
                    let row = l.row(i);
                    let mu: f64 = row[..i].iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
                    let b = (level - mu) / row[i];
                    let u: f64 = rng.sample(Open01);
                    let (zi, log_mass) = truncated_below(b, u);
                    z[i] = zi;
                    lw += log_mass;
                    acc[i].push(lw);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![LogMoments::EMPTY; m];
    for chunk in per_chunk {
        for (t, c) in total.iter_mut().zip(chunk) {
            *t = t.merge(c);
        }
    }
    Ok(total.iter().enumerate().map(|(i, mo)| mo.estimate(n, seed, i + 1)).collect())
}

/// GHK estimate of P(max over grid < level).
pub fn persist_ghk(k: &Kernel, grid: &[f64], level: f64, n: usize, seed: u64) -> Result<MCEstimate> {
    Ok(*persist_ghk_curve(k, grid, level, n, seed)?.last().expect("non-empty grid"))
}

/// GHK estimates for every prefix grid[..=i].
pub fn persist_ghk_curve(k: &Kernel, grid: &[f64], level: f64, n: usize, seed: u64) -> Result<Vec<MCEstimate>> {
    let gram = k.gram(grid, JITTER_CAP)?;
    ghk_prefix(&PackedLower::from_matrix(&gram.cholesky), level, n, seed)
}
