//! Euler–Maruyama simulation of the linear interface Langevin system
//! dφ_t(x) = (−φ_t(x) + Σ_y q(y−x) φ_t(y)) dt + √2 dW_t(x), φ_0 ≡ 0, on
//! the torus (Z/LZ)^d. The tracked observable is g_t = φ_t(0).

use crate::error::{Error, Result};
use crate::rng::replicate_stream;
use crate::sampler::{mean_stderr, wilson_stderr, MCEstimate, Method};
use crate::walk::JumpKernel;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const MAX_DT: f64 = 0.05;
/// Upper bound on steps × replicates × field size per run.
pub const WORK_BUDGET: f64 = 2e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LangevinConfig {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub q: JumpKernel,
    pub dt: f64,
    pub t_max: f64,
    pub replicates: usize,
    pub seed: u64,
    /// (s, t) pairs for run_cov.
    #[serde(default)]
    pub pairs: Vec<(f64, f64)>,
    /// Persistence interval [t0, t1].
    #[serde(default)]
    pub interval: Option<(f64, f64)>,
    /// Permit L < 4R (the deliberate degenerate wrap).
    #[serde(default)]
    pub allow_wrap: bool,
}

impl LangevinConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: LangevinConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.q.validate()?;
        if self.q.dim() != self.d {
            return Err(Error::InvalidSpec(format!("kernel dimension {} != d = {}", self.q.dim(), self.d)));
        }
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::InvalidSpec(format!("dt must lie in (0, {MAX_DT}], got {}", self.dt)));
        }
        if self.l == 0 || (!self.allow_wrap && (self.l as i64) < 4 * self.q.range()) {
            return Err(Error::InvalidSpec(format!("L = {} below 4R = {}", self.l, 4 * self.q.range())));
        }
        if !(self.t_max > 0.0) || self.replicates < 2 {
            return Err(Error::InvalidSpec("need t_max > 0 and at least two replicates".into()));
        }
        let work = self.steps() as f64 * self.replicates as f64 * (self.l as f64).powi(self.d as i32);
        if work > WORK_BUDGET {
            return Err(Error::InvalidSpec(format!("run needs {work:e} site updates, budget {WORK_BUDGET:e}")));
        }
        for &(s, t) in &self.pairs {
            if !(0.0..=self.t_max).contains(&s) || !(0.0..=self.t_max).contains(&t) {
                return Err(Error::InvalidSpec(format!("pair ({s}, {t}) outside [0, t_max]")));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_max / self.dt).round() as usize
    }

    /// Step index nearest to time t.
    pub fn step_of(&self, t: f64) -> usize {
        (t / self.dt).round() as usize
    }
}

/// Jump kernel folded onto the torus as a neighbour table.
#[derive(Debug, Clone)]
pub struct TorusKernel {
    sites: usize,
    rates: Vec<f64>,
    /// `neighbours[x * rates.len() + k]` is the flat index of x + y_k.
    neighbours: Vec<usize>,
}

impl TorusKernel {
    pub fn new(q: &JumpKernel, l: usize) -> Self {
        let d = q.dim();
        let sites = l.pow(d as u32);
        let rates: Vec<f64> = q.support().iter().map(|(_, r)| *r).collect();
        let mut neighbours = Vec::with_capacity(sites * rates.len());
        let mut coord = vec![0usize; d];
        for x in 0..sites {
            let mut r = x;
            for c in coord.iter_mut() {
                *c = r % l;
                r /= l;
            }
            for (y, _) in q.support() {
                let mut idx = 0;
                let mut stride = 1;
                for (c, o) in coord.iter().zip(y) {
                    idx += (*c as i64 + o).rem_euclid(l as i64) as usize * stride;
                    stride *= l;
                }
                neighbours.push(idx);
            }
        }
        TorusKernel { sites, rates, neighbours }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    /// (q ⋆ φ)(x) = Σ_y q(y) φ(x + y) with periodic wrap.
    pub fn convolve(&self, phi: &[f64], out: &mut [f64]) {
        let k = self.rates.len();
        for (x, o) in out.iter_mut().enumerate() {
            let nb = &self.neighbours[x * k..(x + 1) * k];
            *o = nb.iter().zip(&self.rates).map(|(&i, r)| r * phi[i]).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub values: Vec<f64>,
    pub step: usize,
    pub dt: f64,
}

impl FieldState {
    pub fn zero(sites: usize, dt: f64) -> Self {
        FieldState { values: vec![0.0; sites], step: 0, dt }
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }
}

/// One Euler–Maruyama step φ' = φ + dt(−φ + q⋆φ) + √(2dt) ξ.
pub fn step(state: &mut FieldState, q: &TorusKernel, noise: &[f64], scratch: &mut Vec<f64>) {
    scratch.resize(state.values.len(), 0.0);
    q.convolve(&state.values, scratch);
    let dt = state.dt;
    let amp = (2.0 * dt).sqrt();
    for ((v, c), xi) in state.values.iter_mut().zip(scratch.iter()).zip(noise) {
        *v += dt * (c - *v) + amp * xi;
    }
    state.step += 1;
}

/// Runs one replicate and returns g at every step 0..=steps.
pub fn trajectory(cfg: &LangevinConfig, q: &TorusKernel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let steps = cfg.steps();
    let mut st = FieldState::zero(q.sites(), cfg.dt);
    let mut g = Vec::with_capacity(steps + 1);
    g.push(0.0);
    let mut noise = vec![0.0; q.sites()];
    let mut scratch = Vec::new();
    for _ in 0..steps {
        noise.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        step(&mut st, q, &noise, &mut scratch);
        g.push(st.values[0]);
    }
    g
}

/// All replicate trajectories, row-major (replicates × (steps + 1)).
pub fn run_trajectories(cfg: &LangevinConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let q = TorusKernel::new(&cfg.q, cfg.l);
    Ok((0..cfg.replicates)
        .into_par_iter()
        .map(|i| trajectory(cfg, &q, &mut replicate_stream(cfg.seed, i as u64)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovEstimate {
    pub s: f64,
    pub t: f64,
    pub cov: f64,
    pub stderr: f64,
}

/// Empirical Cov(g_s, g_t) from trajectories (g is centred, so the
/// covariance estimator is the mean product).
pub fn cov_from_trajectories(cfg: &LangevinConfig, traj: &[Vec<f64>]) -> Vec<CovEstimate> {
    cfg.pairs
        .iter()
        .map(|&(s, t)| {
            let (i, j) = (cfg.step_of(s), cfg.step_of(t));
            let prods: Vec<f64> = traj.iter().map(|g| g[i] * g[j]).collect();
            let (cov, stderr) = mean_stderr(&prods);
            CovEstimate { s, t, cov, stderr }
        })
        .collect()
}

pub fn run_cov(cfg: &LangevinConfig) -> Result<Vec<CovEstimate>> {
    let traj = run_trajectories(cfg)?;
    Ok(cov_from_trajectories(cfg, &traj))
}

/// Fraction of replicates with g < 0 at every recorded step in [t0, t1].
pub fn persistence_from_trajectories(cfg: &LangevinConfig, traj: &[Vec<f64>], t0: f64, t1: f64) -> Result<MCEstimate> {
    let (a, b) = (cfg.step_of(t0), cfg.step_of(t1));
    if b >= traj.first().map_or(0, |g| g.len()) || a > b {
        return Err(Error::invalid(format!("interval [{t0}, {t1}] outside the simulated horizon")));
    }
    let hits = traj.iter().filter(|g| g[a..=b].iter().all(|&v| v < 0.0)).count();
    if hits == 0 {
        return Err(Error::AllExceeded);
    }
    let n = traj.len();
    let p = hits as f64 / n as f64;
    Ok(MCEstimate {
        p_hat: p,
        log_p: p.ln(),
        stderr: wilson_stderr(hits, n),
        n,
        method: Method::Crude,
        seed: cfg.seed,
        grid_size: b - a + 1,
    })
}

/// Persistence over the configured interval.
pub fn run_persistence(cfg: &LangevinConfig) -> Result<MCEstimate> {
    let (t0, t1) = cfg.interval.ok_or_else(|| Error::InvalidSpec("no persistence interval".into()))?;
    if t0 < 1.0 {
        return Err(Error::InvalidSpec(format!("persistence interval must start at t >= 1, got {t0}")));
    }
    let traj = run_trajectories(cfg)?;
    persistence_from_trajectories(cfg, &traj, t0, t1)
}

/// Persistence over [t0, T] for every T in `horizons` from one set of runs.
pub fn run_persistence_curve(cfg: &LangevinConfig, t0: f64, horizons: &[f64]) -> Result<Vec<MCEstimate>> {
    let traj = run_trajectories(cfg)?;
    horizons.iter().map(|&t| persistence_from_trajectories(cfg, &traj, t0, t)).collect()
}

/// Sample skewness and excess kurtosis with their large-sample standard
/// errors √(6/n) and √(24/n).
pub fn moment_check(xs: &[f64]) -> (f64, f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let c = |k: i32| xs.iter().map(|x| (x - m).powi(k)).sum::<f64>() / n;
    let var = c(2);
    (c(3) / var.powf(1.5), c(4) / (var * var) - 3.0, (6.0 / n).sqrt(), (24.0 / n).sqrt())
}

const MAGIC: &[u8; 4] = b"PHI1";

/// Writes trajectories as: magic "PHI1", d (u32), L (u32), dt (f64),
/// steps (u64), then each replicate's steps + 1 values (f64), all
/// little-endian.
pub fn write_trajectories<W: Write>(mut w: W, cfg: &LangevinConfig, traj: &[Vec<f64>]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(cfg.d as u32).to_le_bytes())?;
    w.write_all(&(cfg.l as u32).to_le_bytes())?;
    w.write_all(&cfg.dt.to_le_bytes())?;
    w.write_all(&(cfg.steps() as u64).to_le_bytes())?;
    for g in traj {
        for v in g {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub d: u32,
    pub l: u32,
    pub dt: f64,
    pub steps: u64,
    pub trajectories: Vec<Vec<f64>>,
}

pub fn read_trajectories<R: Read>(mut r: R) -> Result<TrajectoryFile> {
    let mut head = [0u8; 28];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(Error::invalid("not a PHI1 trajectory file"));
    }
    let d = u32::from_le_bytes(head[4..8].try_into().unwrap());
    let l = u32::from_le_bytes(head[8..12].try_into().unwrap());
    let dt = f64::from_le_bytes(head[12..20].try_into().unwrap());
    let steps = u64::from_le_bytes(head[20..28].try_into().unwrap());
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let row = (steps as usize + 1) * 8;
    if body.len() % row != 0 {
        return Err(Error::invalid("trajectory file truncated"));
    }
    let trajectories = body
        .chunks_exact(row)
        .map(|c| c.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect())
        .collect();
    Ok(TrajectoryFile { d, l, dt, steps, trajectories })
}
