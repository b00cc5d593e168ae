//! Covariance catalog: normalized correlation functions A(s, t), Gram
//! matrices with Cholesky factors, and conditional Gaussian laws.

use crate::error::{Error, Result};
use crate::quad;
use crate::rv::{RegVarFn, DEFAULT_TOL};
use crate::walk::LatticeWalk;
use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Smallest diagonal boost tried when a Gram matrix fails to factor.
pub const JITTER_START: f64 = 1e-12;
/// Default jitter cap; larger boosts count as a genuine PD failure.
pub const JITTER_CAP: f64 = 1e-8;

/// Lower time bound for kernels defined through primitives on [1, ∞).
pub const INTERFACE_T_MIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "params", rename_all = "snake_case")]
enum KernelSpec {
    StationaryCm { rho: RegVarFn },
    Interface { rho: RegVarFn },
    LimitInterface { rho: RegVarFn },
    Lamperti { gamma: f64 },
    Ou { theta: f64 },
    FouStationary { hurst: f64 },
    LatticeGamma { q: Arc<LatticeWalk> },
}

/// A unit-variance correlation kernel.
///
/// Serialized as `{"variant": ..., "params": {...}}`; deserialization
/// applies the same checks as the constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub enum Kernel {
    /// ρ(|s − t|) for a completely monotone ρ.
    StationaryCm(RegVarFn),
    /// (I(s+t) − I(|s−t|)) / √(I(2s) I(2t)).
    Interface(RegVarFn),
    /// 1 − I(|s−t|)/I(∞), for integrable ρ.
    LimitInterface(RegVarFn),
    /// cosh(τ/2)^{1−γ} − sinh(τ/2)^{1−γ} in log-time lag τ.
    Lamperti(f64),
    /// e^{−θ|s−t|}.
    Ou(f64),
    /// Stationary fractional OU correlation Λ_H.
    FouStationary(f64),
    /// Normalized Γ^(q) of a lattice walk.
    LatticeGamma(Arc<LatticeWalk>),
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = Error;
    fn try_from(s: KernelSpec) -> Result<Self> {
        match s {
            KernelSpec::StationaryCm { rho } => Kernel::stationary_cm(rho),
            KernelSpec::Interface { rho } => Ok(Kernel::Interface(rho)),
            KernelSpec::LimitInterface { rho } => Kernel::limit_interface(rho),
            KernelSpec::Lamperti { gamma } => Kernel::lamperti(gamma),
            KernelSpec::Ou { theta } => Kernel::ou(theta),
            KernelSpec::FouStationary { hurst } => Kernel::fou(hurst),
            KernelSpec::LatticeGamma { q } => Ok(Kernel::LatticeGamma(q)),
        }
    }
}

impl From<Kernel> for KernelSpec {
    fn from(k: Kernel) -> Self {
        match k {
            Kernel::StationaryCm(rho) => KernelSpec::StationaryCm { rho },
            Kernel::Interface(rho) => KernelSpec::Interface { rho },
            Kernel::LimitInterface(rho) => KernelSpec::LimitInterface { rho },
            Kernel::Lamperti(gamma) => KernelSpec::Lamperti { gamma },
            Kernel::Ou(theta) => KernelSpec::Ou { theta },
            Kernel::FouStationary(hurst) => KernelSpec::FouStationary { hurst },
            Kernel::LatticeGamma(q) => KernelSpec::LatticeGamma { q },
        }
    }
}

impl Kernel {
    pub fn stationary_cm(rho: RegVarFn) -> Result<Self> {
        if !rho.family().is_completely_monotone() {
            return Err(Error::invalid(format!("{rho} is not completely monotone")));
        }
        Ok(Kernel::StationaryCm(rho))
    }

    pub fn interface(rho: RegVarFn) -> Self {
        Kernel::Interface(rho)
    }

    pub fn limit_interface(rho: RegVarFn) -> Result<Self> {
        match rho.primitive_infty(DEFAULT_TOL)? {
            crate::rv::Tail::Finite { .. } => Ok(Kernel::LimitInterface(rho)),
            crate::rv::Tail::Divergent => Err(Error::Divergent(format!("I(∞) for {rho}"))),
        }
    }

    pub fn lamperti(gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::invalid(format!("Lamperti index must lie in [0, 1), got {gamma}")));
        }
        Ok(Kernel::Lamperti(gamma))
    }

    pub fn ou(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::invalid(format!("OU rate must be positive, got {theta}")));
        }
        Ok(Kernel::Ou(theta))
    }

    pub fn fou(hurst: f64) -> Result<Self> {
        check_hurst(hurst)?;
        Ok(Kernel::FouStationary(hurst))
    }

    pub fn lattice(walk: LatticeWalk) -> Self {
        Kernel::LatticeGamma(Arc::new(walk))
    }

    /// Smallest admissible time.
    pub fn t_min(&self) -> f64 {
        match self {
            Kernel::Interface(_) | Kernel::LatticeGamma(_) => INTERFACE_T_MIN,
            Kernel::Lamperti(_) => f64::NEG_INFINITY,
            _ => 0.0,
        }
    }

    /// True when A(s, t) depends on s − t only.
    pub fn is_stationary(&self) -> bool {
        !matches!(self, Kernel::Interface(_) | Kernel::LatticeGamma(_))
    }

    fn check_domain(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < self.t_min() {
            return Err(Error::OutOfDomain { t, lower: self.t_min() });
        }
        Ok(())
    }

    /// Correlation at lag τ ≥ 0 for stationary kernels.
    pub fn stationary_corr(&self, tau: f64) -> Result<f64> {
        let tau = tau.abs();
        Ok(match self {
            Kernel::StationaryCm(rho) => rho.eval(tau),
            Kernel::LimitInterface(rho) => {
                let total = rho.primitive_infty(DEFAULT_TOL)?.finite().ok_or_else(|| {
                    Error::Divergent(format!("I(∞) for {rho}"))
                })?;
                (1.0 - rho.primitive(tau, DEFAULT_TOL)? / total).max(0.0)
            }
            Kernel::Lamperti(gamma) => lamperti_corr(*gamma, tau),
            Kernel::Ou(theta) => (-theta * tau).exp(),
            Kernel::FouStationary(h) => fou_corr(*h, tau)?,
            Kernel::Interface(_) | Kernel::LatticeGamma(_) => {
                return Err(Error::unsupported(format!("{self} is not stationary")))
            }
        })
    }

    /// A(s, t).
    pub fn corr(&self, s: f64, t: f64) -> Result<f64> {
        self.check_domain(s)?;
        self.check_domain(t)?;
        if s == t {
            return Ok(1.0);
        }
        match self {
            Kernel::Interface(rho) => {
                let i = |x: f64| rho.primitive(x, DEFAULT_TOL);
                let num = i(s + t)? - i((s - t).abs())?;
                Ok((num / (i(2.0 * s)? * i(2.0 * t)?).sqrt()).clamp(0.0, 1.0))
            }
            Kernel::LatticeGamma(w) => Ok(w.gamma_corr(s, t)?.1.clamp(0.0, 1.0)),
            _ => self.stationary_corr(s - t),
        }
    }

    /// Full correlation matrix on `grid`. Distinct lags (stationary
    /// kernels) or distinct primitive arguments (interface kernels) are
    /// evaluated once, in parallel.
    pub fn corr_matrix(&self, grid: &[f64]) -> Result<DMatrix<f64>> {
        for &t in grid {
            self.check_domain(t)?;
        }
        let n = grid.len();
        let mut m = DMatrix::<f64>::identity(n, n);
        if self.is_stationary() {
            let mut lags: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
            for i in 0..n {
                for j in 0..i {
                    lags.push((grid[i] - grid[j]).abs());
                }
            }
            let table = Memo::build(lags, |tau| self.stationary_corr(tau))?;
            for i in 0..n {
                for j in 0..i {
                    let v = table.get((grid[i] - grid[j]).abs());
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        } else {
            let prim = |x: f64| -> Result<f64> {
                match self {
                    Kernel::Interface(rho) => rho.primitive(x, DEFAULT_TOL),
                    Kernel::LatticeGamma(w) => w.primitive(x),
                    _ => unreachable!("stationary kernels handled above"),
                }
            };
            let mut args: Vec<f64> = Vec::with_capacity(n * n + n);
            for i in 0..n {
                args.push(2.0 * grid[i]);
                for j in 0..i {
                    args.push(grid[i] + grid[j]);
                    args.push((grid[i] - grid[j]).abs());
                }
            }
            let table = Memo::build(args, prim)?;
            for i in 0..n {
                for j in 0..i {
                    let (s, t) = (grid[i], grid[j]);
                    let num = table.get(s + t) - table.get((s - t).abs());
                    let v = (num / (table.get(2.0 * s) * table.get(2.0 * t)).sqrt()).clamp(0.0, 1.0);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        Ok(m)
    }

    /// Correlation matrix with its Cholesky factor; see [`GramResult`].
    pub fn gram(&self, grid: &[f64], jitter_cap: f64) -> Result<GramResult> {
        if grid.is_empty() {
            return Err(Error::invalid("empty grid"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid must be strictly increasing"));
        }
        GramResult::factor(self.corr_matrix(grid)?, jitter_cap)
    }

    /// Law of the process on `grid` given Z(grid[i]) = vals for i ∈ `observed`.
    pub fn conditional_law(
        &self,
        grid: &[f64],
        observed: &[usize],
        vals: &[f64],
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let a = self.corr_matrix(grid)?;
        conditional_from_matrix(&a, observed, vals)
    }

    /// (sup over the η̃-window, inf over the η-window) of A(t, t+τ)/ρ(τ).
    pub fn envelope_check<F: Fn(f64) -> f64>(&self, rho: F, window: &VerificationWindow) -> Result<(f64, f64)> {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for &t in &window.t_grid {
            for &tau in &window.tau_grid {
                let in_sup = tau <= window.eta_tilde * t;
                let in_inf = tau <= window.eta * t;
                if !(in_sup || in_inf) || tau <= 0.0 {
                    continue;
                }
                let r = self.corr(t, t + tau)? / rho(tau);
                if in_sup {
                    sup = sup.max(r);
                }
                if in_inf {
                    inf = inf.min(r);
                }
            }
        }
        Ok((sup, inf))
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Kernel::StationaryCm(r) => write!(f, "stationary[{r}]"),
            Kernel::Interface(r) => write!(f, "interface[{r}]"),
            Kernel::LimitInterface(r) => write!(f, "limit_interface[{r}]"),
            Kernel::Lamperti(g) => write!(f, "lamperti(gamma={g})"),
            Kernel::Ou(t) => write!(f, "ou(theta={t})"),
            Kernel::FouStationary(h) => write!(f, "fou(H={h})"),
            Kernel::LatticeGamma(w) => write!(f, "lattice_gamma[{}]", w.kernel()),
        }
    }
}

/// Values of a function on a set of arguments, looked up by exact bits.
struct Memo {
    keys: Vec<f64>,
    vals: Vec<f64>,
}

impl Memo {
    fn build<F: Fn(f64) -> Result<f64> + Sync>(mut keys: Vec<f64>, f: F) -> Result<Self> {
        keys.sort_by(f64::total_cmp);
        keys.dedup_by(|a, b| a.to_bits() == b.to_bits());
        let vals = keys.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
        Ok(Memo { keys, vals })
    }

    fn get(&self, x: f64) -> f64 {
        let i = self.keys.binary_search_by(|k| k.total_cmp(&x)).expect("memo key present");
        self.vals[i]
    }
}

/// C*_γ at lag τ, as cosh^p·(1 − tanh^p) with p = 1 − γ to avoid the
/// cancellation of the difference form at large τ.
pub fn lamperti_corr(gamma: f64, tau: f64) -> f64 {
    let h = 0.5 * tau.abs();
    if h == 0.0 {
        return 1.0;
    }
    let p = 1.0 - gamma;
    let x = (-2.0 * h).exp();
    let log_cosh = h + x.ln_1p() - std::f64::consts::LN_2;
    let log_tanh = (-x).ln_1p() - x.ln_1p();
    (p * log_cosh).exp() * -(p * log_tanh).exp_m1()
}

fn check_hurst(h: f64) -> Result<()> {
    if !(h > 0.5 && h < 1.0) {
        return Err(Error::invalid(format!("Hurst index must lie in (1/2, 1), got {h}")));
    }
    Ok(())
}

/// Truncation point of the inner integral over v.
const FOU_V_MAX: f64 = 40.0;
/// Lags beyond this many correlation lengths contribute below e^{−60}.
const FOU_WINDOW: f64 = 60.0;

/// R(s) = H(2H−1)∫₀^{40} e^{−v}(v+s)^{2H−2} dv, computed after the
/// substitution y = (v+s)^{2H−1}, which makes the integrand smooth:
/// R(s) = H ∫ exp(s − y^{1/(2H−1)}) dy over [s^{2H−1}, (s+40)^{2H−1}].
pub fn fou_inner(h: f64, s: f64) -> Result<f64> {
    let e = 2.0 * h - 1.0;
    let (lo, hi) = (s.powf(e), (s + FOU_V_MAX).powf(e));
    let r = quad::integrate(|y: f64| (s - y.powf(1.0 / e)).exp(), lo, hi, 1e-13)?;
    Ok(h * r.value)
}

/// Normalizer Var = ∫₀^∞∫₀^∞ e^{−u−v} H(2H−1)|u−v|^{2H−2} du dv. The
/// double integral reduces to R(0) because the inner kernel depends on
/// u − v only and the e^{−u−v} weight integrates out along the diagonal.
pub fn fou_variance(h: f64) -> Result<f64> {
    check_hurst(h)?;
    fou_inner(h, 0.0)
}

/// Λ_H(0, τ) = e^{−τ} + Var⁻¹ ∫₀^τ e^{−(τ−s)} R(s) ds.
pub fn fou_corr(h: f64, tau: f64) -> Result<f64> {
    check_hurst(h)?;
    let tau = tau.abs();
    if tau == 0.0 {
        return Ok(1.0);
    }
    let var = fou_variance(h)?;
    let lo = (tau - FOU_WINDOW).max(0.0);
    let outer = |s: f64| (s - tau).exp() * fou_inner(h, s).unwrap_or(f64::NAN);
    let mid = (tau - 5.0).max(lo);
    let j = quad::integrate(outer, lo, mid, 1e-13)?.value + quad::integrate(outer, mid, tau, 1e-13)?.value;
    Ok(((-tau).exp() + j / var).min(1.0))
}

/// Correlation matrix and its lower Cholesky factor, with the diagonal
/// boost that was needed to factor it.
#[derive(Debug, Clone)]
pub struct GramResult {
    /// The factorized matrix (including `jitter_used` on the diagonal).
    pub matrix: DMatrix<f64>,
    pub cholesky: DMatrix<f64>,
    pub jitter_used: f64,
}

impl GramResult {
    /// Factors `a`, doubling a diagonal boost from 1e−12 up to `cap`.
    pub fn factor(a: DMatrix<f64>, cap: f64) -> Result<Self> {
        let mut jitter = 0.0;
        loop {
            let mut m = a.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::new(m.clone()) {
                return Ok(GramResult { matrix: m, cholesky: c.l(), jitter_used: jitter });
            }
            jitter = if jitter == 0.0 { JITTER_START } else { 2.0 * jitter };
            if jitter > cap {
                return Err(Error::NotPositiveDefinite { cap });
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Writes the matrix and factor as CSV: `kind,i,j,value`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["kind", "i", "j", "value"])?;
        for (kind, m) in [("matrix", &self.matrix), ("cholesky", &self.cholesky)] {
            for i in 0..m.nrows() {
                for j in 0..=i {
                    w.write_record([kind.to_string(), i.to_string(), j.to_string(), format!("{:e}", m[(i, j)])])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Gaussian conditioning on a given correlation matrix.
pub fn conditional_from_matrix(
    a: &DMatrix<f64>,
    observed: &[usize],
    vals: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if observed.len() != vals.len() {
        return Err(Error::invalid("observed indices and values differ in length"));
    }
    let mut seen = vec![false; n];
    for &i in observed {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(Error::invalid(format!("observed index {i} out of range or repeated")));
        }
    }
    let k = observed.len();
    if k == 0 {
        return Ok((DVector::zeros(n), a.clone()));
    }
    let block = DMatrix::from_fn(k, k, |i, j| a[(observed[i], observed[j])]);
    let cross = DMatrix::from_fn(n, k, |t, i| a[(t, observed[i])]);
    let chol = Cholesky::new(block).ok_or(Error::Singular)?;
    let z = DVector::from_column_slice(vals);
    let mean = &cross * chol.solve(&z);
    let cov = a - &cross * chol.solve(&cross.transpose());
    Ok((mean, cov))
}

/// Sampled (t, τ) window on which the envelope ratios A(t,t+τ)/ρ(τ) are
/// examined; τ ≤ η̃t for the upper ratio and τ ≤ ηt for the lower one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationWindow {
    pub eta: f64,
    pub eta_tilde: f64,
    pub t_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
}

impl VerificationWindow {
    /// Geometric t and τ grids with `points` nodes each.
    pub fn geometric(eta: f64, eta_tilde: f64, t0: f64, t1: f64, points: usize) -> Self {
        let geo = |a: f64, b: f64| -> Vec<f64> {
            (0..points).map(|i| a * (b / a).powf(i as f64 / (points - 1).max(1) as f64)).collect()
        };
        VerificationWindow {
            eta,
            eta_tilde,
            t_grid: geo(t0, t1),
            tau_grid: geo(1.0, eta.max(eta_tilde) * t1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lamperti_values() {
        for &tau in &[0.1, 1.0, 7.0, 60.0] {
            assert!((lamperti_corr(0.0, tau) - (-tau / 2.0).exp()).abs() < 1e-14);
        }
        let direct = 1f64.cosh().sqrt() - 1f64.sinh().sqrt();
        assert!((lamperti_corr(0.5, 2.0) - direct).abs() < 1e-14);
    }

    #[test]
    fn ou_two_point_gram() {
        let g = Kernel::ou(1.0).unwrap().gram(&[0.0, 1.0], JITTER_CAP).unwrap();
        assert!((g.matrix[(1, 0)] - (-1f64).exp()).abs() < 1e-15);
        assert!((g.cholesky[(1, 1)] - (1.0 - (-2f64).exp()).sqrt()).abs() < 1e-15);
        assert_eq!(g.jitter_used, 0.0);
    }

    #[test]
    fn markov_conditioning() {
        let k = Kernel::ou(1.0).unwrap();
        let (m, c) = k.conditional_law(&[0.0, 1.0, 2.0], &[1], &[0.7]).unwrap();
        assert!(c[(0, 2)].abs() < 1e-15);
        assert!((m[0] - 0.7 * (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn interface_domain() {
        let k = Kernel::interface(RegVarFn::constant());
        assert!(matches!(k.corr(0.5, 2.0), Err(Error::OutOfDomain { .. })));
        // ρ ≡ 1 gives the Brownian correlation min/√(st)
        assert!((k.corr(1.0, 4.0).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn serde_round_trip() {
        let k = Kernel::stationary_cm(RegVarFn::power_law(0.5).unwrap()).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        assert!(s.contains("\"variant\":\"stationary_cm\""), "{s}");
        assert_eq!(serde_json::from_str::<Kernel>(&s).unwrap(), k);
        let bad = r#"{"variant":"lamperti","params":{"gamma":1.5}}"#;
        assert!(serde_json::from_str::<Kernel>(bad).is_err());
    }
}
