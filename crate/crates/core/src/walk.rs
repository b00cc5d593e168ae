//! Continuous-time lattice random walks driven by a finite-range symmetric
//! jump kernel q: return probabilities ρ^(q)(u) = P(S_u = 0), Green
//! functions of the embedded discrete walk, and the interface covariance
//! Γ^(q)(s, t) = ∫_{|s−t|}^{s+t} ρ^(q).

use crate::error::{Error, Result};
use crate::rv::PrimitiveCache;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::fmt;

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_BOX_CELLS: usize = 1 << 26;
const MAX_FOURIER_POINTS: usize = 1 << 27;

/// Finite-support jump distribution on Z^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(Vec<i64>, f64)>", into = "Vec<(Vec<i64>, f64)>")]
pub struct JumpKernel {
    d: usize,
    support: Vec<(Vec<i64>, f64)>,
}

impl TryFrom<Vec<(Vec<i64>, f64)>> for JumpKernel {
    type Error = Error;
    fn try_from(v: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        JumpKernel::new(v)
    }
}

impl From<JumpKernel> for Vec<(Vec<i64>, f64)> {
    fn from(q: JumpKernel) -> Self {
        q.support
    }
}

impl JumpKernel {
    /// Builds a kernel from `(offset, rate)` pairs. Only shape is checked
    /// here; see [`JumpKernel::validate`] for the probabilistic clauses.
    pub fn new(support: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        let d = support
            .first()
            .map(|(x, _)| x.len())
            .ok_or_else(|| Error::InvalidJumpKernel(vec!["empty support".into()]))?;
        if d == 0 {
            return Err(Error::InvalidJumpKernel(vec!["zero-dimensional offsets".into()]));
        }
        if let Some((x, _)) = support.iter().find(|(x, _)| x.len() != d) {
            return Err(Error::InvalidJumpKernel(vec![format!(
                "offset {x:?} has dimension {} but the first offset has {d}",
                x.len()
            )]));
        }
        Ok(JumpKernel { d, support })
    }

    /// Simple random walk: rate 1/(2d) to each nearest neighbour.
    pub fn srw(d: usize) -> Self {
        let mut support = Vec::with_capacity(2 * d);
        for i in 0..d {
            for s in [1, -1] {
                let mut x = vec![0; d];
                x[i] = s;
                support.push((x, 1.0 / (2 * d) as f64));
            }
        }
        JumpKernel { d, support }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn support(&self) -> &[(Vec<i64>, f64)] {
        &self.support
    }

    /// Range R = max |x_i| over the support.
    pub fn range(&self) -> i64 {
        self.support.iter().flat_map(|(x, _)| x.iter().map(|c| c.abs())).max().unwrap_or(0)
    }

    /// True when every jump changes the coordinate-sum parity, so that
    /// p_n(0) vanishes for odd n.
    pub fn is_bipartite(&self) -> bool {
        self.support.iter().all(|(x, _)| x.iter().sum::<i64>().rem_euclid(2) == 1)
    }

    pub fn is_srw(&self) -> bool {
        self.support.len() == 2 * self.d
            && self.support.iter().all(|(x, r)| {
                (r - 1.0 / (2 * self.d) as f64).abs() <= SYMMETRY_TOL
                    && x.iter().map(|c| c.abs()).sum::<i64>() == 1
            })
            && (0..self.d).all(|i| {
                [1, -1].iter().all(|&s| self.support.iter().any(|(x, _)| x[i] == s))
            })
    }

    /// Checks symmetry, positivity and normalization, absence of the
    /// origin, and that the support generates Z^d as a group. All
    /// violated clauses are reported together.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (i, (x, r)) in self.support.iter().enumerate() {
            if !(r.is_finite() && *r > 0.0) {
                bad.push(format!("rate at {x:?} is not positive: {r}"));
            }
            if x.iter().all(|&c| c == 0) {
                bad.push("origin carries a jump rate".into());
            }
            if self.support[..i].iter().any(|(y, _)| y == x) {
                bad.push(format!("duplicate site {x:?}"));
            }
            let neg: Vec<i64> = x.iter().map(|c| -c).collect();
            match self.support.iter().find(|(y, _)| *y == neg) {
                Some((_, rn)) if (rn - r).abs() <= SYMMETRY_TOL => {}
                Some((_, rn)) => bad.push(format!("asymmetric rates q({x:?}) = {r}, q({neg:?}) = {rn}")),
                None => bad.push(format!("q({x:?}) = {r} but q({neg:?}) = 0")),
            }
        }
        let total: f64 = self.support.iter().map(|(_, r)| r).sum();
        if (total - 1.0).abs() > SYMMETRY_TOL {
            bad.push(format!("rates sum to {total}, not 1"));
        }
        if let Some(det) = lattice_index(&self.support.iter().map(|(x, _)| x.clone()).collect::<Vec<_>>(), self.d)
        {
            if det != 1 {
                bad.push(format!("support generates a sublattice of index {det}, not Z^{}", self.d));
            }
        } else {
            bad.push(format!("support does not span Z^{} (rank deficient)", self.d));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidJumpKernel(bad))
        }
    }

    /// 1 − φ(k) = Σ q(x)(1 − cos k·x), the symbol of the generator.
    pub fn symbol(&self, k: &[f64]) -> f64 {
        self.support
            .iter()
            .map(|(x, r)| {
                let phase: f64 = x.iter().zip(k).map(|(&a, &b)| a as f64 * b).sum();
                2.0 * r * (0.5 * phase).sin().powi(2)
            })
            .sum()
    }
}

impl fmt::Display for JumpKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_srw() {
            write!(f, "SRW(d={})", self.d)
        } else {
            write!(f, "q(d={}, |supp|={}, R={})", self.d, self.support.len(), self.range())
        }
    }
}

/// Index [Z^d : span(rows)] by unimodular row reduction; `None` when the
/// span has rank below `d`.
fn lattice_index(rows: &[Vec<i64>], d: usize) -> Option<i128> {
    let mut m: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&c| c as i128).collect()).collect();
    let mut det: i128 = 1;
    let mut top = 0;
    for c in 0..d {
        loop {
            // smallest nonzero entry in column c below `top` becomes pivot
            let piv = (top..m.len()).filter(|&i| m[i][c] != 0).min_by_key(|&i| m[i][c].abs());
            let Some(p) = piv else { return None };
            m.swap(top, p);
            let mut done = true;
            for i in top + 1..m.len() {
                if m[i][c] != 0 {
                    let f = m[i][c] / m[top][c];
                    for j in 0..d {
                        m[i][j] -= f * m[top][j];
                    }
                    if m[i][c] != 0 {
                        done = false;
                    }
                }
            }
            if done {
                break;
            }
        }
        det *= m[top][c].abs();
        top += 1;
    }
    Some(det)
}

/// Discrete n-step return probabilities p_n(0), n = 0..=n_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnProbTable {
    pub d: usize,
    pub bipartite: bool,
    pub p: Vec<f64>,
    /// Bound on Σ_{n>n_max} p_n(0); infinite for recurrent walks.
    pub truncation_error: f64,
}

/// Value of a Green function together with the estimated and bounding
/// contribution of the truncated tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenValue {
    pub value: f64,
    pub tail_estimate: f64,
    pub tail_bound: f64,
}

/// Builds p_n(0) for n ≤ n_max. Simple random walks use the exact axis
/// decomposition (any dimension); other kernels use box convolution and
/// need d ≤ 4.
pub fn step_return_probs(q: &JumpKernel, n_max: usize) -> Result<ReturnProbTable> {
    q.validate()?;
    if q.is_srw() {
        Ok(srw_return_probs(q.d, n_max))
    } else {
        convolution_return_probs(q, n_max)
    }
}

/// p_n(0) by iterated convolution over the box [−mR, mR]^d that the walk
/// can reach in m steps, using p_{2m} = Σ_x P_m(x)², p_{2m+1} = Σ_x P_m(x)P_{m+1}(x).
pub fn convolution_return_probs(q: &JumpKernel, n_max: usize) -> Result<ReturnProbTable> {
    let d = q.d;
    if d > 4 {
        return Err(Error::unsupported(format!("box convolution in d = {d} > 4")));
    }
    let r = q.range() as usize;
    let m_max = n_max / 2 + 1;
    let half = (m_max + 1) * r;
    let side = 2 * half + 1;
    let cells = side.checked_pow(d as u32).filter(|&c| c <= MAX_BOX_CELLS).ok_or_else(|| {
        Error::unsupported(format!("convolution box {side}^{d} exceeds the memory budget"))
    })?;
    let strides: Vec<usize> = (0..d).map(|i| side.pow(i as u32)).collect();
    let jumps: Vec<(isize, f64)> = q
        .support
        .iter()
        .map(|(x, rate)| (x.iter().zip(&strides).map(|(&c, &s)| c as isize * s as isize).sum(), *rate))
        .collect();
    let centre: usize = strides.iter().map(|s| s * half).sum();
    let mut cur = vec![0.0; cells];
    let mut next = vec![0.0; cells];
    cur[centre] = 1.0;
    let mut p = vec![0.0; n_max + 1];
    p[0] = 1.0;
    for m in 0..m_max {
        // next = P_{m+1}, supported in radius (m+1)R
        let rad = (m + 1) * r;
        for_each_in_box(d, half, rad, &strides, |idx| {
            let mut acc = 0.0;
            for &(off, rate) in &jumps {
                acc += rate * cur[(idx as isize - off) as usize];
            }
            next[idx] = acc;
        });
        let (mut even, mut odd) = (0.0, 0.0);
        for_each_in_box(d, half, rad, &strides, |idx| {
            odd += cur[idx] * next[idx];
            even += next[idx] * next[idx];
        });
        if 2 * m + 1 <= n_max {
            p[2 * m + 1] = odd;
        }
        if 2 * m + 2 <= n_max {
            p[2 * m + 2] = even;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    if q.is_bipartite() {
        for v in p.iter_mut().skip(1).step_by(2) {
            *v = 0.0;
        }
    }
    Ok(finish_table(d, q.is_bipartite(), p))
}

fn for_each_in_box<F: FnMut(usize)>(d: usize, half: usize, rad: usize, strides: &[usize], mut f: F) {
    let lo = half - rad;
    let hi = half + rad;
    let mut coord = vec![lo; d];
    loop {
        let idx: usize = coord.iter().zip(strides).map(|(c, s)| c * s).sum();
        f(idx);
        let mut i = 0;
        loop {
            if i == d {
                return;
            }
            if coord[i] < hi {
                coord[i] += 1;
                break;
            }
            coord[i] = lo;
            i += 1;
        }
    }
}

/// Exact p_n(0) for the simple random walk in any dimension: the first
/// axis receives Binomial(n, 1/d) of the steps and returns with the
/// one-dimensional probability, the remaining steps form a walk in d − 1
/// dimensions.
pub fn srw_return_probs(d: usize, n_max: usize) -> ReturnProbTable {
    let lnf: Vec<f64> = (0..=n_max).map(|k| if k < 2 { 0.0 } else { ln_gamma(k as f64 + 1.0) }).collect();
    // C(2m, m) 4^{-m} by its ratio recurrence
    let mut one_d = vec![0.0; n_max + 1];
    one_d[0] = 1.0;
    for k in (2..=n_max).step_by(2) {
        one_d[k] = one_d[k - 2] * (k - 1) as f64 / k as f64;
    }
    let mut p = one_d.clone();
    for j in 2..=d {
        let (lp, lq) = ((1.0 / j as f64).ln(), (1.0 - 1.0 / j as f64).ln());
        let prev = p;
        p = (0..=n_max)
            .into_par_iter()
            .map(|n| {
                let mut acc = 0.0;
                for k in (0..=n).step_by(2) {
                    let rest = prev[n - k];
                    if rest == 0.0 {
                        continue;
                    }
                    let w = (lnf[n] - lnf[k] - lnf[n - k] + k as f64 * lp + (n - k) as f64 * lq).exp();
                    acc += w * one_d[k] * rest;
                }
                acc
            })
            .collect();
    }
    finish_table(d, true, p)
}

fn finish_table(d: usize, bipartite: bool, p: Vec<f64>) -> ReturnProbTable {
    let mut t = ReturnProbTable { d, bipartite, p, truncation_error: f64::INFINITY };
    if d >= 3 {
        if let Some(env) = t.envelope() {
            t.truncation_error = env.tail_bound(t.n_max() + 1);
        }
    }
    t
}

/// Local-CLT envelope p_n(0) ≈ C n^{−d/2} fitted on the upper half of
/// the table.
#[derive(Debug, Clone, Copy)]
struct Envelope {
    d: f64,
    stride: usize,
    last: usize,
    c_last: f64,
    c_max: f64,
}

impl Envelope {
    /// Σ_{n ≥ k, n ≡ last (mod stride)} C n^{−d/2} by the midpoint integral.
    fn sum_from(&self, k: usize, c: f64) -> f64 {
        let s = self.stride;
        let first = k + (self.last + s - k % s) % s;
        let x0 = first as f64 - 0.5 * s as f64;
        c / s as f64 * x0.powf(1.0 - 0.5 * self.d) / (0.5 * self.d - 1.0)
    }

    fn tail_estimate(&self, k: usize) -> f64 {
        self.sum_from(k, self.c_last)
    }

    fn tail_bound(&self, k: usize) -> f64 {
        self.sum_from(k, 1.5 * self.c_max)
    }
}

impl ReturnProbTable {
    pub fn n_max(&self) -> usize {
        self.p.len() - 1
    }

    fn envelope(&self) -> Option<Envelope> {
        let stride = if self.bipartite { 2 } else { 1 };
        let last = (0..=self.n_max()).rev().find(|&n| n > 0 && self.p[n] > 0.0)?;
        let dh = 0.5 * self.d as f64;
        let scaled = |n: usize| (n as f64).powf(dh) * self.p[n];
        let c_last = scaled(last);
        let c_max = (last / 2..=last).filter(|n| self.p[*n] > 0.0).map(scaled).fold(0.0, f64::max);
        Some(Envelope { d: self.d as f64, stride, last, c_last, c_max })
    }

    /// n^{d/2} p_n(0) at the end of the table, the discrete local-CLT constant.
    pub fn clt_constant(&self) -> f64 {
        self.envelope().map_or(f64::NAN, |e| e.c_last)
    }

    /// Largest number of Poisson terms needed at time `u` and tolerance `tol`.
    fn poisson_cutoff(u: f64, tol: f64) -> usize {
        let mut n = (u + 12.0 * u.sqrt() + 50.0).ceil();
        // extend with the Chernoff bound P(N ≥ n) ≤ e^{−u}(eu/n)^n
        while -u + n * (1.0 + u.ln() - n.ln()) > tol.ln() && n < 1e9 {
            n += (0.1 * n).max(8.0).ceil();
        }
        n as usize
    }

    /// ρ^(q)(u) = Σ_n e^{−u}uⁿ/n! p_n(0) by uniformization.
    pub fn return_prob_ct(&self, u: f64, tol: f64) -> Result<f64> {
        if !(u >= 0.0) || !u.is_finite() {
            return Err(Error::invalid(format!("time must be finite and >= 0, got {u}")));
        }
        if u == 0.0 {
            return Ok(self.p[0]);
        }
        let cut = Self::poisson_cutoff(u, tol.max(1e-300));
        if cut > self.n_max() {
            return Err(Error::ToleranceUnreachable {
                tol,
                reason: format!("u = {u} needs {cut} Poisson terms, table has {}", self.n_max()),
            });
        }
        Ok(poisson_mix(u, cut, |n| self.p[n]))
    }

    /// G_k = Σ_{n ≥ k} p_n(0), closing the series with the local-CLT envelope.
    pub fn green(&self, k: usize) -> Result<GreenValue> {
        if self.d <= 2 {
            return Err(Error::Divergent(format!("Green function of a recurrent walk (d = {})", self.d)));
        }
        let env = self
            .envelope()
            .ok_or_else(|| Error::invalid("return-probability table too short for an envelope"))?;
        let n1 = self.n_max() + 1;
        let head: f64 = if k < n1 { self.p[k..].iter().rev().sum() } else { 0.0 };
        let from = k.max(n1);
        let (te, tb) = (env.tail_estimate(from), env.tail_bound(from));
        Ok(GreenValue { value: head + te, tail_estimate: te, tail_bound: tb })
    }

    /// Probability r that the discrete walk ever returns to 0, from the
    /// renewal equation p_n = Σ_{j=1}^n f_j p_{n−j}. Independent of the
    /// Green series: the unresolved tail of f is closed with f_n ≈ p_n(1−r)².
    pub fn first_return_probability(&self) -> Result<f64> {
        if self.d <= 2 {
            return Ok(1.0);
        }
        let n = self.n_max();
        let mut f = vec![0.0; n + 1];
        for m in 1..=n {
            let conv: f64 = (1..m).map(|j| f[j] * self.p[m - j]).sum();
            f[m] = self.p[m] - conv;
        }
        let head: f64 = f.iter().sum();
        let env = self
            .envelope()
            .ok_or_else(|| Error::invalid("return-probability table too short for an envelope"))?;
        let tail_p = env.tail_estimate(n + 1);
        let mut r = head;
        for _ in 0..100 {
            r = head + tail_p * (1.0 - r).powi(2);
        }
        Ok(r)
    }
}

/// Σ_{n ≤ cut} Poisson(u)(n)·a(n), weights by recurrence outward from the mode.
fn poisson_mix<A: Fn(usize) -> f64>(u: f64, cut: usize, a: A) -> f64 {
    let mode = (u.floor() as usize).min(cut);
    let w_mode = (-u + mode as f64 * u.ln() - ln_gamma(mode as f64 + 1.0)).exp();
    let mut up = 0.0;
    let mut w = w_mode;
    for n in mode..=cut {
        if n > mode {
            w *= u / n as f64;
        }
        up += w * a(n);
    }
    let mut down = 0.0;
    let mut w = w_mode;
    for n in (0..mode).rev() {
        w *= (n + 1) as f64 / u;
        down += w * a(n);
        if w == 0.0 {
            break;
        }
    }
    down + up
}

/// P(Poisson(u) ≥ n) for n = 0..=cut, by the same weights.
fn poisson_upper_tails(u: f64, cut: usize) -> Vec<f64> {
    let mode = (u.floor() as usize).min(cut);
    let mut w = vec![0.0; cut + 1];
    w[mode] = (-u + mode as f64 * u.ln() - ln_gamma(mode as f64 + 1.0)).exp();
    for n in mode + 1..=cut {
        w[n] = w[n - 1] * u / n as f64;
    }
    for n in (0..mode).rev() {
        w[n] = w[n + 1] * (n + 1) as f64 / u;
    }
    let mut tails = vec![0.0; cut + 1];
    let mut acc = 0.0;
    for n in (0..=cut).rev() {
        acc += w[n];
        tails[n] = acc;
    }
    // tails[n] currently misses P(N > cut); anchor tails[0] to 1
    let missing = 1.0 - tails[0];
    tails.iter_mut().for_each(|t| *t += missing.max(0.0));
    tails
}

/// ρ^(q)(u) = (2π)^{−d}∫ exp(−u(1 − φ(k))) dk by the trapezoid rule on an
/// N^d grid. The rule is exact up to aliasing Σ_{m≠0} P(S_u = N m), which
/// is bounded with a Chernoff estimate; N grows until that bound is ≤ tol.
pub fn return_prob_fourier(q: &JumpKernel, u: f64, tol: f64) -> Result<f64> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::invalid(format!("time must be finite and >= 0, got {u}")));
    }
    if u == 0.0 {
        return Ok(1.0);
    }
    let d = q.d;
    let mut n = 8usize;
    while aliasing_bound(q, u, n) > tol {
        n *= 2;
        if n.checked_pow(d as u32).is_none_or(|c| c > MAX_FOURIER_POINTS) {
            return Err(Error::ToleranceUnreachable {
                tol,
                reason: format!("Fourier grid for u = {u} in d = {d} exceeds {MAX_FOURIER_POINTS} points"),
            });
        }
    }
    // 1 − cos(2π m/N) = 2 sin²(π m/N), indexed by m mod N
    let table: Vec<f64> = (0..n).map(|m| 2.0 * (PI * m as f64 / n as f64).sin().powi(2)).collect();
    let jumps: Vec<(Vec<i64>, f64)> = q.support.clone();
    let inner = n.pow(d as u32 - 1);
    let partial: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|j0| {
            let mut acc = 0.0;
            let mut j = vec![0usize; d];
            j[0] = j0;
            for rest in 0..inner {
                let mut r = rest;
                for slot in j.iter_mut().skip(1) {
                    *slot = r % n;
                    r /= n;
                }
                let mut sym = 0.0;
                for (x, rate) in &jumps {
                    let ph: i64 = x.iter().zip(&j).map(|(&c, &jj)| c * jj as i64).sum();
                    sym += rate * table[ph.rem_euclid(n as i64) as usize];
                }
                acc += (-u * sym).exp();
            }
            acc
        })
        .collect();
    Ok(partial.iter().sum::<f64>() / n.pow(d as u32) as f64)
}

fn aliasing_bound(q: &JumpKernel, u: f64, n: usize) -> f64 {
    let a = n as f64;
    (0..q.d)
        .map(|i| {
            // P(|S^i_u| ≥ N) ≤ 2 inf_θ exp(−θN + u Σ q(x)(cosh θx_i − 1))
            let best = (1..=400)
                .map(|k| {
                    let th = 0.05 * k as f64;
                    let psi: f64 = q.support.iter().map(|(x, r)| r * ((th * x[i] as f64).cosh() - 1.0)).sum();
                    -th * a + u * psi
                })
                .fold(f64::INFINITY, f64::min);
            2.0 * best.exp()
        })
        .sum()
}

/// A validated jump kernel with its return-probability table and a cached
/// primitive of ρ^(q).
#[derive(Debug)]
pub struct LatticeWalk {
    q: JumpKernel,
    table: ReturnProbTable,
    cache: PrimitiveCache,
}

/// Absolute tolerance used for ρ^(q) evaluations and for Γ quadrature.
pub const WALK_TOL: f64 = 1e-12;

impl LatticeWalk {
    /// Default table length: long enough that uniformization covers the
    /// times used by the kernels (u up to a few thousand in d = 1).
    pub fn default_n_max(q: &JumpKernel) -> usize {
        if q.is_srw() {
            return if q.d <= 3 { 6000 } else { 3000 };
        }
        match q.d {
            1 => 6000,
            2 => 400,
            3 => 80,
            _ => 30,
        }
    }

    pub fn new(q: JumpKernel) -> Result<Self> {
        let n = Self::default_n_max(&q);
        Self::with_table(q, n)
    }

    pub fn with_table(q: JumpKernel, n_max: usize) -> Result<Self> {
        let table = step_return_probs(&q, n_max)?;
        Ok(LatticeWalk { q, table, cache: PrimitiveCache::default() })
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.q
    }

    pub fn table(&self) -> &ReturnProbTable {
        &self.table
    }

    /// ρ^(q)(u): uniformization while the table suffices, Fourier beyond.
    pub fn rho(&self, u: f64) -> f64 {
        match self.table.return_prob_ct(u, WALK_TOL) {
            Ok(v) => v,
            Err(Error::ToleranceUnreachable { .. }) => {
                return_prob_fourier(&self.q, u, WALK_TOL).unwrap_or(f64::NAN)
            }
            Err(_) => f64::NAN,
        }
    }

    /// I(t) = ∫₀ᵗ ρ^(q). For t below the table's reach the closed form
    /// Σ_n p_n P(Poisson(t) ≥ n+1) is used; quadrature otherwise.
    pub fn primitive(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("time must be finite and >= 0, got {t}")));
        }
        if t == 0.0 {
            return Ok(0.0);
        }
        let cut = ReturnProbTable::poisson_cutoff(t, WALK_TOL) + 1;
        if cut <= self.table.n_max() {
            let tails = poisson_upper_tails(t, cut);
            return Ok((0..cut).map(|n| self.table.p[n] * tails[n + 1]).sum());
        }
        self.cache.integral(&|u| self.rho(u), t, WALK_TOL)
    }

    /// Γ^(q)(s, t) = I(s + t) − I(|s − t|).
    pub fn gamma(&self, s: f64, t: f64) -> Result<f64> {
        if !(s > 0.0 && t > 0.0) {
            return Err(Error::invalid(format!("Γ needs s, t > 0, got ({s}, {t})")));
        }
        Ok(self.primitive(s + t)? - self.primitive((s - t).abs())?)
    }

    /// Returns (Γ(s,t), Γ(s,t)/√(Γ(s,s)Γ(t,t))).
    pub fn gamma_corr(&self, s: f64, t: f64) -> Result<(f64, f64)> {
        let g = self.gamma(s, t)?;
        let norm = (self.primitive(2.0 * s)? * self.primitive(2.0 * t)?).sqrt();
        Ok((g, (g / norm).min(1.0)))
    }

    pub fn green(&self, k: usize) -> Result<GreenValue> {
        self.table.green(k)
    }

    /// C̄(0, τ) = E[G_{N_τ}]/G_0 with N_τ ~ Poisson(τ).
    pub fn limit_interface_corr(&self, tau: f64) -> Result<f64> {
        if self.q.d <= 2 {
            return Err(Error::Divergent(format!("limiting kernel needs a transient walk (d = {})", self.q.d)));
        }
        if !(tau >= 0.0) {
            return Err(Error::invalid(format!("τ must be >= 0, got {tau}")));
        }
        let g0 = self.table.green(0)?.value;
        if tau == 0.0 {
            return Ok(1.0);
        }
        let cut = ReturnProbTable::poisson_cutoff(tau, WALK_TOL);
        let greens: Vec<f64> = (0..=cut).map(|k| self.table.green(k).map(|g| g.value)).collect::<Result<_>>()?;
        Ok(poisson_mix(tau, cut, |k| greens[k]) / g0)
    }

    /// Lower and upper sandwich 1 − P(N ≥ 1) ≤ C̄ ≤ 1 − P(N ≥ 1)/G_0.
    pub fn limit_interface_sandwich(&self, tau: f64) -> Result<(f64, f64)> {
        let g0 = self.table.green(0)?.value;
        let hit = -(-tau).exp_m1();
        Ok((1.0 - hit, 1.0 - hit / g0))
    }
}

impl Serialize for LatticeWalk {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.q.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeWalk {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let q = JumpKernel::deserialize(d)?;
        LatticeWalk::new(q).map_err(serde::de::Error::custom)
    }
}

impl PartialEq for LatticeWalk {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q && self.table.n_max() == other.table.n_max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_clauses() {
        assert!(JumpKernel::srw(1).validate().is_ok());
        let even = JumpKernel::new(vec![(vec![2], 0.5), (vec![-2], 0.5)]).unwrap();
        let e = even.validate().unwrap_err().to_string();
        assert!(e.contains("index 2"), "{e}");
        let one_sided = JumpKernel::new(vec![(vec![1], 1.0)]).unwrap();
        let e = one_sided.validate().unwrap_err().to_string();
        assert!(e.contains("q([-1]) = 0"), "{e}");
        let flat = JumpKernel::new(vec![(vec![1, 0], 0.5), (vec![-1, 0], 0.5)]).unwrap();
        assert!(flat.validate().unwrap_err().to_string().contains("rank"));
    }

    #[test]
    fn knight_moves_generate_z2() {
        let mut s = Vec::new();
        for (a, b) in [(1, 2), (2, 1)] {
            for (sa, sb) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                s.push((vec![sa * a, sb * b], 0.125));
            }
        }
        assert!(JumpKernel::new(s).unwrap().validate().is_ok());
    }

    #[test]
    fn small_tables() {
        let t1 = step_return_probs(&JumpKernel::srw(1), 4).unwrap();
        assert_eq!(t1.p[0], 1.0);
        assert!((t1.p[2] - 0.5).abs() < 1e-15 && (t1.p[4] - 0.375).abs() < 1e-15);
        let t2 = convolution_return_probs(&JumpKernel::srw(2), 2).unwrap();
        assert!((t2.p[2] - 0.25).abs() < 1e-15 && t2.p[1] == 0.0);
    }

    #[test]
    fn srw_routes_agree() {
        for d in 1..=3 {
            let a = srw_return_probs(d, 40);
            let b = convolution_return_probs(&JumpKernel::srw(d), 40).unwrap();
            for n in 0..=40 {
                assert!((a.p[n] - b.p[n]).abs() < 1e-13, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn fourier_matches_uniformization() {
        let q = JumpKernel::srw(2);
        let t = step_return_probs(&q, 400).unwrap();
        for &u in &[0.5, 5.0, 40.0] {
            let a = t.return_prob_ct(u, 1e-13).unwrap();
            let b = return_prob_fourier(&q, u, 1e-13).unwrap();
            assert!((a - b).abs() < 1e-12, "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn closed_form_primitive_matches_quadrature() {
        let w = LatticeWalk::with_table(JumpKernel::srw(1), 200).unwrap();
        let direct = crate::quad::integrate(|u| w.rho(u), 0.0, 3.0, 1e-13).unwrap().value;
        assert!((w.primitive(3.0).unwrap() - direct).abs() < 1e-11);
    }

    #[test]
    fn uniformization_matches_bessel_series() {
        let t = step_return_probs(&JumpKernel::srw(1), 400).unwrap();
        let worst = (0..=500)
            .map(|i| {
                let u = 0.1 * i as f64;
                (t.return_prob_ct(u, 1e-14).unwrap() - crate::oracle::bessel_return_1d(u)).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-10, "{worst}");
    }

    #[test]
    fn green_d3_two_ways() {
        let w = LatticeWalk::new(JumpKernel::srw(3)).unwrap();
        let g = w.green(0).unwrap();
        let r = w.table().first_return_probability().unwrap();
        assert!((g.value - 1.516_386).abs() < 1e-4, "{g:?}");
        assert!((1.0 / (1.0 - r) - 1.516_386).abs() < 1e-4, "{r}");
        assert!(g.tail_bound >= g.tail_estimate);
        let (lo, hi) = w.limit_interface_sandwich(1.0).unwrap();
        let c = w.limit_interface_corr(1.0).unwrap();
        assert!(lo <= c && c <= hi, "{lo} {c} {hi}");
    }

    #[test]
    fn gamma_d1_reference() {
        let w = LatticeWalk::new(JumpKernel::srw(1)).unwrap();
        let (g, c) = w.gamma_corr(1.0, 2.0).unwrap();
        let direct = crate::quad::integrate(crate::oracle::bessel_return_1d, 1.0, 3.0, 1e-13).unwrap().value;
        assert!((g - direct).abs() < 1e-10, "{g} vs {direct}");
        assert!(c > 0.0 && c < 1.0);
    }
}
