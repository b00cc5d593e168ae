//! Verification suites. Each check yields one ledger line with the measured
//! value, the bound it is held to and a verdict; errors count as failures.

use crate::error::{Error, Result};
use crate::kernel::{lamperti_corr, Kernel, GramResult, VerificationWindow, JITTER_CAP};
use crate::langevin::{self, LangevinConfig};
use crate::oracle;
use crate::rng::replicate_stream;
use crate::rv::RegVarFn;
use crate::sampler::{self, fit_exponent, ghk_prefix, FitMode, FitPoint, PackedLower};
use crate::walk::{return_prob_fourier, srw_return_probs, JumpKernel, LatticeWalk, WALK_TOL};
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Rv,
    Kernels,
    Walk,
    Sampler,
    Langevin,
    All,
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rv" => Suite::Rv,
            "kernels" => Suite::Kernels,
            "walk" => Suite::Walk,
            "sampler" => Suite::Sampler,
            "langevin" => Suite::Langevin,
            "all" => Suite::All,
            _ => return Err(Error::invalid(format!("unknown suite `{s}` (rv, kernels, walk, sampler, langevin, all)"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {}/{} value={:.6e} bound={}", self.suite, self.name, self.value, self.bound)
    }
}

/// Outcome of one property: (value, bound description, pass).
type Outcome = Result<(f64, String, bool)>;

fn record(suite: &str, name: &str, f: impl FnOnce() -> Outcome) -> Check {
    let (value, bound, pass) = f().unwrap_or_else(|e| (f64::NAN, format!("error: {e}"), false));
    Check { suite: suite.into(), name: name.into(), value, bound, pass }
}

fn at_most(value: f64, bound: f64) -> Outcome {
    Ok((value, format!("<= {bound:.4e}"), value <= bound))
}

fn within(value: f64, target: f64, tol: f64) -> Outcome {
    Ok((value, format!("{target:.6} ± {tol:.3e}"), (value - target).abs() <= tol))
}

pub fn verify(suite: Suite) -> Vec<Check> {
    match suite {
        Suite::Rv => rv_suite(),
        Suite::Kernels => kernel_suite(),
        Suite::Walk => walk_suite(),
        Suite::Sampler => sampler_suite(),
        Suite::Langevin => langevin_suite(),
        Suite::All => [rv_suite(), kernel_suite(), walk_suite(), sampler_suite(), langevin_suite()].concat(),
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}

fn rv_suite() -> Vec<Check> {
    let s = "rv";
    let mut out = Vec::new();
    for &a in &[0.3, 0.5] {
        out.push(record(s, &format!("karamata_alpha_{a}"), || {
            let r = RegVarFn::power_law(a)?.karamata_ratio(0.0, 1e6)?;
            let target = 1.0 / (1.0 - a);
            within(r, target, 0.01 * target)
        }));
    }
    for &a in &[1.5, 2.0, 3.0] {
        out.push(record(s, &format!("karamata_tail_alpha_{a}"), || {
            let r = RegVarFn::power_law(a)?.karamata_ratio(f64::INFINITY, 1e6)?;
            let target = 1.0 / (a - 1.0);
            within(r, target, 0.01 * target)
        }));
    }
    for &mu in &[0.5, 1.0, 2.0] {
        out.push(record(s, &format!("riemann_mu_{mu}"), || {
            let r = RegVarFn::power_law(0.5)?.riemann_limit(mu, 1e8)?;
            within(r, 1.0 / mu, 0.02 / mu)
        }));
    }
    out.push(record(s, "rv_index_power_law", || {
        let d = RegVarFn::power_law(0.5)?.rv_index_check(&[0.5, 2.0, 10.0], &[1e6, 1e7])?;
        at_most(d, 1e-3)
    }));
    out.push(record(s, "primitive_closed_form", || {
        // (1+t)^{1/2}: I(t) = 2(√(1+t) − 1)
        let f = RegVarFn::power_law(0.5)?;
        let worst = [0.5, 10.0, 1e3, 1e6]
            .iter()
            .map(|&t| Ok((f.primitive(t, 1e-10)? - 2.0 * ((1.0 + t).sqrt() - 1.0)).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        at_most(worst, 1e-8)
    }));
    out.push(record(s, "decay_rate_regular_variation", || {
        let f = RegVarFn::power_law(0.5)?;
        let r = f.decay_rate(2e8)? / f.decay_rate(1e8)?;
        within(r, 2f64.sqrt(), 0.05 * 2f64.sqrt())
    }));
    out.push(record(s, "primitive_reproducible", || {
        let a = RegVarFn::power_log(0.7, 1.0)?.primitive(12345.6, 1e-10)?;
        let b = RegVarFn::power_log(0.7, 1.0)?.primitive(12345.6, 1e-10)?;
        Ok(((a - b).abs(), "bitwise equal".into(), a.to_bits() == b.to_bits()))
    }));
    out
}

fn kernel_suite() -> Vec<Check> {
    let s = "kernels";
    let mut out = Vec::new();
    out.push(record(s, "lamperti_gamma0_is_ou_half", || {
        let worst = (0..=500).map(|i| i as f64 * 0.1).map(|t| (lamperti_corr(0.0, t) - (-0.5 * t).exp()).abs()).fold(0.0, f64::max);
        at_most(worst, 1e-12)
    }));
    out.push(record(s, "conditional_markov_ou", || {
        let (_, cov) = Kernel::ou(1.0)?.conditional_law(&[0.0, 1.0, 2.0], &[1], &[0.3])?;
        at_most(cov[(0, 2)].abs(), 1e-12)
    }));
    for &g in &[0.25, 0.5, 0.75] {
        out.push(record(s, &format!("lamperti_limit_gamma_{g}"), || {
            let k = Kernel::interface(RegVarFn::power_law(g)?);
            let shift = 20.0;
            let mut worst: f64 = 0.0;
            for &(v, u) in &[(0.0, 0.1), (0.0, 0.5), (0.0, 1.0), (0.5, 2.0), (0.0, 4.0), (1.0, 7.0)] {
                let c = k.corr(f64::exp(v + shift), f64::exp(u + shift))?;
                worst = worst.max((c - lamperti_corr(g, u - v)).abs());
            }
            at_most(worst, 1e-2)
        }));
    }
    out.push(record(s, "limit_interface_limit_alpha_3", || {
        let rho = RegVarFn::power_law(3.0)?;
        let (k, lim) = (Kernel::interface(rho.clone()), Kernel::limit_interface(rho)?);
        let shift = 1e4;
        let mut worst: f64 = 0.0;
        for &tau in &[0.5, 1.0, 5.0, 20.0] {
            worst = worst.max((k.corr(shift, shift + tau)? - lim.corr(0.0, tau)?).abs());
        }
        at_most(worst, 1e-2)
    }));
    out.push(record(s, "fou_plateau_h_0.75", || {
        let h = 0.75;
        let tau: f64 = 1e3;
        let v = tau.powf(2.0 - 2.0 * h) * Kernel::fou(h)?.stationary_corr(tau)?;
        let target = (2.0 * h - 1.0) / statrs::function::gamma::gamma(2.0 * h);
        within(v, target, 0.05 * target)
    }));
    out.push(record(s, "fou_dominates_ou", || {
        let mut worst = f64::INFINITY;
        for &h in &[0.6, 0.75, 0.9] {
            let k = Kernel::fou(h)?;
            for &tau in &[0.1, 0.5, 1.0, 3.0, 10.0, 30.0] {
                worst = worst.min(k.stationary_corr(tau)? - (-tau as f64).exp());
            }
        }
        Ok((worst, ">= 0".into(), worst >= -1e-10))
    }));
    out.push(record(s, "catalog_nonnegative", || {
        let walk = LatticeWalk::new(JumpKernel::srw(3))?;
        let kernels = [
            Kernel::stationary_cm(RegVarFn::power_law(0.5)?)?,
            Kernel::interface(RegVarFn::power_log(0.5, 1.0)?),
            Kernel::limit_interface(RegVarFn::power_law(2.5)?)?,
            Kernel::lamperti(0.5)?,
            Kernel::ou(1.0)?,
            Kernel::fou(0.7)?,
            Kernel::lattice(walk),
        ];
        let grid = [1.0, 1.5, 3.0, 10.0, 40.0];
        let mut worst = f64::INFINITY;
        for k in &kernels {
            worst = worst.min(k.corr_matrix(&grid)?.min());
        }
        Ok((worst, ">= 0".into(), worst >= 0.0))
    }));
    out.push(record(s, "stationary_cm_gram_without_jitter", || {
        let k = Kernel::stationary_cm(RegVarFn::power_law(0.5)?)?;
        let mut rng = replicate_stream(7, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let mut g: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..50.0)).collect();
            g.sort_by(f64::total_cmp);
            g.dedup_by(|a, b| (*a - *b).abs() < 0.05);
            worst = worst.max(k.gram(&g, JITTER_CAP)?.jitter_used);
        }
        at_most(worst, 0.0)
    }));
    out.push(record(s, "stationary_envelope_exact", || {
        let rho = RegVarFn::power_law(0.5)?;
        let k = Kernel::stationary_cm(rho.clone())?;
        let (sup, inf) = k.envelope_check(|t| rho.eval(t), &VerificationWindow::geometric(0.5, 0.5, 10.0, 1e3, 12))?;
        at_most((sup - 1.0).abs().max((inf - 1.0).abs()), 1e-12)
    }));
    out
}

fn walk_suite() -> Vec<Check> {
    let s = "walk";
    let mut out = Vec::new();
    out.push(record(s, "bessel_agreement_d1", || {
        let w = LatticeWalk::new(JumpKernel::srw(1))?;
        let worst = (0..=500).map(|i| i as f64 * 0.1).map(|u| (w.rho(u) - oracle::bessel_return_1d(u)).abs()).fold(0.0, f64::max);
        at_most(worst, 1e-10)
    }));
    let g0 = 1.516386;
    out.push(record(s, "green0_d3_series", || {
        let w = LatticeWalk::new(JumpKernel::srw(3))?;
        within(w.green(0)?.value, g0, 1e-3)
    }));
    out.push(record(s, "green0_d3_renewal", || {
        let w = LatticeWalk::new(JumpKernel::srw(3))?;
        within(1.0 / (1.0 - w.table().first_return_probability()?), g0, 1e-3)
    }));
    out.push(record(s, "fourier_vs_uniformization_d2", || {
        let q = JumpKernel::srw(2);
        let w = LatticeWalk::new(q.clone())?;
        let worst = [0.5, 3.0, 10.0, 40.0]
            .iter()
            .map(|&u| Ok((w.rho(u) - return_prob_fourier(&q, u, WALK_TOL)?).abs()))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        at_most(worst, 1e-10)
    }));
    out.push(record(s, "srw_oracle_d3", || {
        let w = LatticeWalk::new(JumpKernel::srw(3))?;
        let worst = [0.5, 3.0, 20.0, 100.0].iter().map(|&u| (w.rho(u) - oracle::srw_return_ct(3, u)).abs()).fold(0.0, f64::max);
        at_most(worst, 1e-10)
    }));
    out.push(record(s, "kernel_validation", || {
        let knight = JumpKernel::new(
            [(1, 2), (2, 1), (-1, 2), (-2, 1), (1, -2), (2, -1), (-1, -2), (-2, -1)]
                .iter()
                .map(|&(a, b)| (vec![a, b], 0.125))
                .collect(),
        )?;
        let evens = JumpKernel::new(vec![(vec![2], 0.5), (vec![-2], 0.5)]);
        let ok = knight.validate().is_ok() && evens.map_or(true, |k| k.validate().is_err());
        Ok((f64::from(u8::from(ok)), "knight valid, ±2 rejected".into(), ok))
    }));
    out.push(record(s, "even_returns_nonincreasing_d1", || {
        let t = srw_return_probs(1, 2000);
        let worst = t.p.iter().step_by(2).collect::<Vec<_>>().windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        at_most(worst, 0.0)
    }));
    out.push(record(s, "clt_plateau", || {
        let mut worst: f64 = 0.0;
        for d in 1..=3 {
            let w = LatticeWalk::new(JumpKernel::srw(d))?;
            let v: Vec<f64> = (0..=20).map(|i| 200.0 + 10.0 * i as f64).map(|u| u.powf(d as f64 / 2.0) * w.rho(u)).collect();
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
            worst = worst.max(hi / lo - 1.0);
        }
        at_most(worst, 0.02)
    }));
    out.push(record(s, "limit_interface_sandwich_d3", || {
        let w = LatticeWalk::new(JumpKernel::srw(3))?;
        let mut worst = f64::NEG_INFINITY;
        for &tau in &[0.1, 1.0, 5.0] {
            let c = w.limit_interface_corr(tau)?;
            let (lo, hi) = w.limit_interface_sandwich(tau)?;
            worst = worst.max(lo - c).max(c - hi);
        }
        at_most(worst, 1e-12)
    }));
    out.push(record(s, "green_k2_bounded_d6", || {
        let t = srw_return_probs(6, 3000);
        let vals: Vec<f64> = [100usize, 300, 1000, 2000]
            .iter()
            .map(|&k| Ok((k * k) as f64 * t.green(k)?.value))
            .collect::<Result<_>>()?;
        let max = vals.iter().copied().fold(0.0, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        Ok((max / min, "k²G_k max/min over k ≥ 100 <= 1.5".into(), max / min <= 1.5))
    }));
    out
}

fn sampler_suite() -> Vec<Check> {
    let s = "sampler";
    let mut out = Vec::new();
    out.push(record(s, "arcsine_r_grid", || {
        let rs: Vec<f64> = (-9..=9).map(|i| i as f64 / 10.0).collect();
        let exact: Vec<f64> = rs.iter().map(|&r| oracle::orthant2(r)).collect();
        let monotone = exact.windows(2).all(|w| w[1] > w[0]);
        let mut worst: f64 = 0.0;
        for (i, &r) in rs.iter().enumerate() {
            let a = DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
            let l = GramResult::factor(a, JITTER_CAP)?.cholesky;
            let e = ghk_prefix(&PackedLower::from_matrix(&l), 0.0, 20_000, 100 + i as u64)?[1];
            worst = worst.max((e.p_hat - exact[i]).abs() / e.stderr.max(1e-300));
        }
        Ok((worst, "monotone and max |z| <= 3".into(), monotone && worst <= 3.0))
    }));
    out.push(record(s, "slepian_product_bound", || {
        let kernels = [
            Kernel::ou(1.0)?,
            Kernel::fou(0.75)?,
            Kernel::stationary_cm(RegVarFn::power_law(0.5)?)?,
            Kernel::lamperti(0.5)?,
        ];
        let mut rng = replicate_stream(11, 0);
        let mut worst = f64::NEG_INFINITY;
        for (ki, k) in kernels.iter().enumerate() {
            for trial in 0..3 {
                let m = rng.random_range(8..24);
                let mut g: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..8.0)).collect();
                g.sort_by(f64::total_cmp);
                g.dedup_by(|a, b| (*a - *b).abs() < 0.1);
                let m = g.len();
                let mut starts: Vec<usize> = (0..3).map(|_| rng.random_range(1..m)).collect();
                starts.sort();
                starts.dedup();
                let seed = 1000 + 10 * ki as u64 + trial;
                let lower = sampler::slepian_product_bound(k, &g, &starts, 0.0, 20_000, seed)?;
                let full = sampler::persist_ghk(k, &g, 0.0, 20_000, seed + 5000)?;
                let se = lower.stderr.hypot(full.stderr);
                worst = worst.max((lower.p_hat - full.p_hat) / se);
            }
        }
        Ok((worst, "(product − full)/se <= 3".into(), worst <= 3.0))
    }));
    out.push(record(s, "borell_tis", || {
        let k = Kernel::ou(1.0)?;
        let grid: Vec<f64> = (0..201).map(|i| i as f64 * 0.05).collect();
        let n = 20_000;
        let paths = sampler::sample(&k, &grid, n, 21)?;
        let sups: Vec<f64> = (0..n).map(|i| paths.path(i).iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
        let mean = sups.iter().sum::<f64>() / n as f64;
        let mut worst = f64::NEG_INFINITY;
        for x in [1.0f64, 2.0, 3.0] {
            let hits = sups.iter().filter(|&&v| v - mean > x).count();
            let lower = hits as f64 / n as f64 - 3.0 * sampler::wilson_stderr(hits, n);
            worst = worst.max(lower - (-0.5 * x * x).exp());
        }
        at_most(worst, 0.0)
    }));
    out.push(record(s, "ghk_vs_crude_ou", || {
        let k = Kernel::ou(1.0)?;
        let grid: Vec<f64> = (0..41).map(|i| i as f64 * 0.05).collect();
        let a = sampler::persist_ghk(&k, &grid, 0.0, 50_000, 31)?;
        let b = sampler::persist_mc(&k, &grid, 0.0, 50_000, 32)?;
        let z = (a.p_hat - b.p_hat).abs() / a.stderr.hypot(b.stderr);
        at_most(z, 3.0)
    }));
    out.push(record(s, "ghk_vs_grid_oracle_ou", || {
        let grid: Vec<f64> = (0..41).map(|i| i as f64 * 0.05).collect();
        let exact = *oracle::ou_grid_persistence(1.0, 0.05, 41, 0.0, 4000).last().unwrap();
        let a = sampler::persist_ghk(&Kernel::ou(1.0)?, &grid, 0.0, 50_000, 33)?;
        at_most((a.p_hat - exact).abs() / a.stderr, 3.0)
    }));
    out.push(record(s, "ghk_unbiased_block_50", || {
        let block = [[1.0, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 1.0]];
        let m = 50;
        let a = DMatrix::from_fn(m, m, |i, j| if i / 3 == j / 3 { block[i % 3][j % 3] } else { 0.0 });
        let exact_log = 16.0 * oracle::orthant3(0.5, 0.25, 0.5).ln() + oracle::orthant2(0.5).ln();
        let l = PackedLower::from_matrix(&GramResult::factor(a, JITTER_CAP)?.cholesky);
        let ratios: Vec<f64> = (0..30)
            .map(|s| Ok((ghk_prefix(&l, 0.0, 2000, 500 + s)?[m - 1].log_p - exact_log).exp()))
            .collect::<Result<_>>()?;
        let (mean, se) = sampler::mean_stderr(&ratios);
        Ok(((mean - 1.0) / se, "|mean ratio − 1| <= 3 se".into(), (mean - 1.0).abs() <= 3.0 * se))
    }));
    out.push(record(s, "union_bound_dominates", || {
        let (eps, n, r) = (0.05, 100u64, 0.3);
        let a = DMatrix::from_fn(n as usize, n as usize, |i, j| if i == j { 1.0 } else { eps });
        let l = PackedLower::from_matrix(&GramResult::factor(a, JITTER_CAP)?.cholesky);
        let e = ghk_prefix(&l, r, 20_000, 41)?[n as usize - 1];
        let ub = sampler::union_upper_bound(eps, n, r)?;
        at_most(e.p_hat - 3.0 * e.stderr, ub)
    }));
    out.push(record(s, "expected_sup_stationary_ou", || {
        let k = Kernel::ou(1.0)?;
        let (a, sa) = sampler::expected_sup(&k, 0.0, 1.0, 51, 20_000, 51)?;
        let (b, sb) = sampler::expected_sup(&k, 5.0, 1.0, 51, 20_000, 52)?;
        at_most((a - b).abs() / sa.hypot(sb), 3.0)
    }));
    out.push(record(s, "grid_refinement_decreases_persistence", || {
        let k = Kernel::ou(1.0)?;
        let coarse: Vec<f64> = (0..21).map(|i| i as f64 * 0.1).collect();
        let fine: Vec<f64> = (0..41).map(|i| i as f64 * 0.05).collect();
        let a = sampler::persist_ghk(&k, &coarse, 0.0, 50_000, 61)?;
        let b = sampler::persist_ghk(&k, &fine, 0.0, 50_000, 62)?;
        at_most((b.p_hat - a.p_hat) / a.stderr.hypot(b.stderr), 3.0)
    }));
    out.push(record(s, "ou_rate_from_oracle", || {
        let pts: Vec<FitPoint> = (2..=10)
            .map(|t| FitPoint { t: t as f64, log_p: oracle::ou_persistence(t as f64).ln(), stderr: 0.0 })
            .collect();
        let f = fit_exponent(&pts, &FitMode::PerT)?;
        within(f.slope, 1.0, 0.1)
    }));
    out
}

fn langevin_cfg(l: usize, dt: f64, t_max: f64, replicates: usize, seed: u64) -> LangevinConfig {
    LangevinConfig {
        d: 1,
        l,
        q: JumpKernel::srw(1),
        dt,
        t_max,
        replicates,
        seed,
        pairs: vec![(1.0, 2.0), (2.0, 2.0)],
        interval: None,
        allow_wrap: l < 4,
    }
}

fn langevin_suite() -> Vec<Check> {
    let s = "langevin";
    let mut out = Vec::new();
    out.push(record(s, "cov_matches_gamma_d1", || {
        let cfg = langevin_cfg(64, 0.01, 2.0, 2000, 71);
        let c = langevin::run_cov(&cfg)?[0];
        let g = LatticeWalk::new(JumpKernel::srw(1))?.gamma(1.0, 2.0)?;
        at_most((c.cov - g).abs() / c.stderr, 4.0)
    }));
    out.push(record(s, "wrapped_torus_variance", || {
        let cfg = langevin_cfg(1, 0.01, 2.0, 4000, 72);
        let c = langevin::run_cov(&cfg)?[1];
        at_most((c.cov - 4.0).abs() / c.stderr, 3.0)
    }));
    out.push(record(s, "gaussian_marginal", || {
        let cfg = langevin_cfg(64, 0.01, 5.0, 4000, 73);
        let traj = langevin::run_trajectories(&cfg)?;
        let mut z: f64 = 0.0;
        for t in [1.0, 5.0] {
            let xs: Vec<f64> = traj.iter().map(|g| g[cfg.step_of(t)]).collect();
            let (sk, ku, se_s, se_k) = langevin::moment_check(&xs);
            z = z.max((sk / se_s).abs()).max((ku / se_k).abs());
        }
        at_most(z, 4.0)
    }));
    out.push(record(s, "dt_halving_stable", || {
        let a = langevin::run_cov(&langevin_cfg(64, 0.02, 2.0, 2000, 74))?[0];
        let b = langevin::run_cov(&langevin_cfg(64, 0.01, 2.0, 2000, 75))?[0];
        at_most((a.cov - b.cov).abs() / a.stderr.hypot(b.stderr), 3.0)
    }));
    out.push(record(s, "torus_doubling_stable", || {
        let a = langevin::run_cov(&langevin_cfg(32, 0.01, 2.0, 2000, 76))?[0];
        let b = langevin::run_cov(&langevin_cfg(64, 0.01, 2.0, 2000, 77))?[0];
        at_most((a.cov - b.cov).abs() / a.stderr.hypot(b.stderr), 3.0)
    }));
    out
}
