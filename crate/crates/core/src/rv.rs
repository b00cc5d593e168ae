//! Regularly varying correlation tails ρ, their primitives I_ρ and the
//! decay-rate functional a_ρ(t) = t·log I_ρ(t) / I_ρ(t).
//!
//! Every family in the catalog has a closed-form or closed-form-checkable
//! primitive, so all limit statements below can be tested against an
//! analytic oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Default absolute quadrature tolerance for I_ρ.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Panels of the cumulative table; the total error is bounded by
/// `(panels + 1) · tol / PANEL_SPLIT`, which stays below `tol` up to 2^126.
const PANEL_SPLIT: f64 = 128.0;
const MAX_PANEL_INDEX: usize = 126;

/// Family of a regularly varying function ρ : [0, ∞) → (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// (1 + s/scale)^{−α}
    PowerLaw { alpha: f64, scale: f64 },
    /// (1 + s)^{−α} (1 + log(1 + s))^{−β}
    PowerLog { alpha: f64, beta: f64 },
    /// 1 / (1 + s)
    Reciprocal,
    /// (1 + s)^{−α} exp(−κ log(1 + s)^θ), θ ∈ (0, 1)
    Exponentialized { alpha: f64, kappa: f64, theta: f64 },
    /// min(1, s^{−α})
    PowerTail { alpha: f64 },
}

impl Family {
    pub fn alpha(&self) -> f64 {
        match *self {
            Family::PowerLaw { alpha, .. }
            | Family::PowerLog { alpha, .. }
            | Family::Exponentialized { alpha, .. }
            | Family::PowerTail { alpha } => alpha,
            Family::Reciprocal => 1.0,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            Family::PowerLaw { alpha, scale } => (1.0 + s / scale).powf(-alpha),
            Family::PowerLog { alpha, beta } => {
                (1.0 + s).powf(-alpha) * (1.0 + s.ln_1p()).powf(-beta)
            }
            Family::Reciprocal => 1.0 / (1.0 + s),
            Family::Exponentialized { alpha, kappa, theta } => {
                (1.0 + s).powf(-alpha) * (-kappa * s.ln_1p().powf(theta)).exp()
            }
            Family::PowerTail { alpha } => {
                if s <= 1.0 {
                    1.0
                } else {
                    s.powf(-alpha)
                }
            }
        }
    }

    /// Whether ρ is completely monotone, i.e. a mixture of decaying
    /// exponentials, which makes ρ(|s − t|) positive definite.
    pub fn is_completely_monotone(&self) -> bool {
        match *self {
            Family::PowerTail { alpha } => alpha == 0.0,
            _ => true,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        let a = self.alpha();
        if !(a.is_finite() && a >= 0.0) {
            return bad(format!("index alpha must be finite and >= 0, got {a}"));
        }
        match *self {
            Family::PowerLaw { scale, .. } if !(scale.is_finite() && scale > 0.0) => {
                bad(format!("power_law scale must be positive, got {scale}"))
            }
            Family::PowerLog { beta, .. } if !(beta.is_finite() && beta >= 0.0) => {
                bad(format!("power_log beta must be >= 0, got {beta}"))
            }
            Family::Exponentialized { kappa, theta, .. }
                if !(kappa.is_finite() && kappa >= 0.0 && theta > 0.0 && theta < 1.0) =>
            {
                bad(format!("exponentialized needs kappa >= 0 and theta in (0,1), got {kappa}, {theta}"))
            }
            _ => Ok(()),
        }
    }
}

/// Value of I_ρ(∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    Finite { value: f64, err: f64 },
    Divergent,
}

impl Tail {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            Tail::Finite { value, .. } => Some(value),
            Tail::Divergent => None,
        }
    }
}

/// Cumulative values of a primitive on the fixed breakpoint grid
/// `0, 1, 2, 4, 8, …`. The grid does not depend on the call history, so
/// values are reproducible bit for bit for a given tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveTable {
    pub tolerance: f64,
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    pub tail: Option<Tail>,
}

impl PrimitiveTable {
    fn new(tolerance: f64) -> Self {
        PrimitiveTable { tolerance, breakpoints: vec![0.0], values: vec![0.0], tail: None }
    }
}

fn breakpoint(k: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        2f64.powi(k as i32 - 1)
    }
}

/// Index of the largest breakpoint `<= t`.
fn panel_index(t: f64) -> usize {
    if t < 1.0 {
        return 0;
    }
    let mut e = t.log2().floor() as i32;
    if 2f64.powi(e + 1) <= t {
        e += 1;
    }
    if 2f64.powi(e) > t {
        e -= 1;
    }
    (e + 1) as usize
}

/// Append-only cache of cumulative integrals, one table per tolerance.
/// Lookups share a read lock; extensions serialize on the write lock.
#[derive(Debug, Default)]
pub(crate) struct PrimitiveCache {
    tables: RwLock<Vec<PrimitiveTable>>,
}

impl PrimitiveCache {
    fn base(&self, k: usize, tol: f64) -> Option<f64> {
        let tables = self.tables.read().expect("primitive cache poisoned");
        tables
            .iter()
            .find(|t| t.tolerance.to_bits() == tol.to_bits())
            .and_then(|t| t.values.get(k).copied())
    }

    fn extend<F: Fn(f64) -> f64>(&self, f: &F, k: usize, tol: f64) -> Result<f64> {
        let mut tables = self.tables.write().expect("primitive cache poisoned");
        let pos = match tables.iter().position(|t| t.tolerance.to_bits() == tol.to_bits()) {
            Some(p) => p,
            None => {
                tables.push(PrimitiveTable::new(tol));
                tables.len() - 1
            }
        };
        let table = &mut tables[pos];
        while table.values.len() <= k {
            let j = table.values.len();
            let (a, b) = (breakpoint(j - 1), breakpoint(j));
            let piece = quad::integrate(f, a, b, tol / PANEL_SPLIT)?.value;
            let last = *table.values.last().unwrap();
            table.breakpoints.push(b);
            table.values.push(last + piece);
        }
        Ok(table.values[k])
    }

    pub(crate) fn integral<F: Fn(f64) -> f64>(&self, f: &F, t: f64, tol: f64) -> Result<f64> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("primitive needs finite t >= 0, got {t}")));
        }
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
        }
        let k = panel_index(t);
        if k > MAX_PANEL_INDEX {
            return Err(Error::invalid(format!("t = {t} beyond supported range")));
        }
        let base = match self.base(k, tol) {
            Some(v) => v,
            None => self.extend(f, k, tol)?,
        };
        let rest = quad::integrate(f, breakpoint(k), t, tol / PANEL_SPLIT)?.value;
        Ok(base + rest)
    }

    pub(crate) fn snapshot(&self, tol: f64) -> Option<PrimitiveTable> {
        let tables = self.tables.read().expect("primitive cache poisoned");
        tables.iter().find(|t| t.tolerance.to_bits() == tol.to_bits()).cloned()
    }

    fn cached_tail(&self, tol: f64) -> Option<Tail> {
        self.snapshot(tol).and_then(|t| t.tail)
    }

    fn store_tail(&self, tol: f64, tail: Tail) {
        let mut tables = self.tables.write().expect("primitive cache poisoned");
        if let Some(t) = tables.iter_mut().find(|t| t.tolerance.to_bits() == tol.to_bits()) {
            t.tail = Some(tail);
        } else {
            let mut t = PrimitiveTable::new(tol);
            t.tail = Some(tail);
            tables.push(t);
        }
    }
}

/// A regularly varying function ρ ∈ R_α with a shared primitive cache.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "FamilySpec", into = "FamilySpec")]
pub struct RegVarFn {
    family: Family,
    cache: Arc<PrimitiveCache>,
}

impl PartialEq for RegVarFn {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

impl RegVarFn {
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        Ok(RegVarFn { family, cache: Arc::new(PrimitiveCache::default()) })
    }

    pub fn power_law(alpha: f64) -> Result<Self> {
        Self::new(Family::PowerLaw { alpha, scale: 1.0 })
    }

    pub fn power_log(alpha: f64, beta: f64) -> Result<Self> {
        Self::new(Family::PowerLog { alpha, beta })
    }

    pub fn reciprocal() -> Self {
        Self::new(Family::Reciprocal).expect("reciprocal is valid")
    }

    pub fn power_tail(alpha: f64) -> Result<Self> {
        Self::new(Family::PowerTail { alpha })
    }

    /// The constant function ρ ≡ 1 (slowly varying, α = 0).
    pub fn constant() -> Self {
        Self::power_law(0.0).expect("constant is valid")
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn alpha(&self) -> f64 {
        self.family.alpha()
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.family.eval(s)
    }

    /// L_ρ(x) = x^α ρ(x), slowly varying.
    pub fn slowly_varying_part(&self, x: f64) -> f64 {
        x.powf(self.alpha()) * self.eval(x)
    }

    /// I_ρ(t) = ∫₀ᵗ ρ(s) ds to absolute tolerance `tol` (or the round-off
    /// floor when that is larger).
    pub fn primitive(&self, t: f64, tol: f64) -> Result<f64> {
        self.cache.integral(&|s| self.eval(s), t, tol)
    }

    /// Snapshot of the cumulative table built so far at tolerance `tol`.
    pub fn table(&self, tol: f64) -> Option<PrimitiveTable> {
        self.cache.snapshot(tol)
    }

    /// ∫_b^∞ ρ(s) ds for α > 1: geometric panels closed by the Karamata
    /// remainder x·ρ(x)/(α − 1), extended until consecutive remainders agree.
    fn karamata_tail(&self, b: f64, tol: f64) -> Result<(f64, f64)> {
        let alpha = self.alpha();
        let rem = |x: f64| x * self.eval(x) / (alpha - 1.0);
        let mut x = b.max(1.0);
        let mut acc = if b < x { quad::integrate(|s| self.eval(s), b, x, tol / PANEL_SPLIT)?.value } else { 0.0 };
        for _ in 0..MAX_PANEL_INDEX {
            let panel = quad::integrate(|s| self.eval(s), x, 2.0 * x, tol / PANEL_SPLIT)?.value;
            let here = rem(x);
            let next = rem(2.0 * x);
            let discrepancy = (here - (panel + next)).abs();
            acc += panel;
            x *= 2.0;
            if discrepancy <= 0.25 * tol {
                return Ok((acc + next, discrepancy + tol / PANEL_SPLIT));
            }
        }
        Err(Error::ToleranceUnreachable {
            tol,
            reason: format!("Karamata tail of {self} did not settle before 2^{MAX_PANEL_INDEX}"),
        })
    }

    /// ∫_b^∞ ρ(s) ds, or [`Error::Divergent`] / [`Error::Undecided`].
    pub fn tail_integral(&self, b: f64, tol: f64) -> Result<f64> {
        let alpha = self.alpha();
        if alpha > 1.0 {
            return Ok(self.karamata_tail(b, tol)?.0);
        }
        match self.unit_index_tail()? {
            None => Err(Error::Divergent(format!("I_rho(inf) = inf for {self}"))),
            Some(tail_from) => {
                let x = b.max(1.0);
                let head = quad::integrate(|s| self.eval(s), b.min(x), x, tol / PANEL_SPLIT)?.value;
                Ok(head + tail_from(x))
            }
        }
    }

    /// For α ≤ 1: `None` when the integral provably diverges, the exact
    /// remainder `x ↦ ∫_x^∞ ρ` when it provably converges, and
    /// [`Error::Undecided`] otherwise.
    fn unit_index_tail(&self) -> Result<Option<Box<dyn Fn(f64) -> f64>>> {
        let alpha = self.alpha();
        if alpha < 1.0 {
            return Ok(None);
        }
        match self.family {
            Family::PowerLaw { .. } | Family::Reciprocal | Family::PowerTail { .. } => Ok(None),
            Family::PowerLog { beta, .. } if beta <= 1.0 => Ok(None),
            Family::PowerLog { beta, .. } => {
                Ok(Some(Box::new(move |x: f64| (1.0 + x.ln_1p()).powf(1.0 - beta) / (beta - 1.0))))
            }
            Family::Exponentialized { .. } => Err(Error::Undecided(format!(
                "{self}: index 1 with a non-monotone-decidable slowly varying factor"
            ))),
        }
    }

    /// I_ρ(∞).
    pub fn primitive_infty(&self, tol: f64) -> Result<Tail> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
        }
        if let Some(t) = self.cache.cached_tail(tol) {
            return Ok(t);
        }
        let tail = if self.alpha() > 1.0 {
            let head = self.primitive(1.0, tol / 2.0)?;
            let (rest, err) = self.karamata_tail(1.0, tol / 2.0)?;
            Tail::Finite { value: head + rest, err: err + tol / 2.0 }
        } else {
            match self.unit_index_tail()? {
                None => Tail::Divergent,
                Some(rem) => {
                    let head = self.primitive(1.0, tol)?;
                    Tail::Finite { value: head + rem(1.0), err: tol }
                }
            }
        };
        self.cache.store_tail(tol, tail);
        Ok(tail)
    }

    /// a_ρ(t) = t·log I_ρ(t) / I_ρ(t).
    pub fn decay_rate(&self, t: f64) -> Result<f64> {
        let i = self.primitive(t, DEFAULT_TOL)?;
        if i <= 1.0 {
            return Err(Error::DomainTooSmall { t, value: i });
        }
        Ok(t * i.ln() / i)
    }

    /// max over the grid of |ρ(λt)/ρ(t) − λ^{−α}|.
    pub fn rv_index_check(&self, lambdas: &[f64], t_grid: &[f64]) -> Result<f64> {
        if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::invalid("lambda values must lie in (0, inf)"));
        }
        let alpha = self.alpha();
        let mut worst: f64 = 0.0;
        for &t in t_grid {
            let base = self.eval(t);
            for &l in lambdas {
                let r = self.eval(l * t) / base;
                if !r.is_finite() {
                    return Err(Error::NonFinite { what: "rho ratio", at: t, value: r });
                }
                worst = worst.max((r - l.powf(-alpha)).abs());
            }
        }
        Ok(worst)
    }

    /// Ratio statistic of the Karamata estimate.
    ///
    /// For α < 1 and `0 <= a < b`: (I(b) − I(a)) / (L(b)(b^{1−α} − a^{1−α})),
    /// which tends to 1/(1 − α). For α > 1 and `b < a <= inf`:
    /// (I(a) − I(b)) / (L(b)(b^{1−α} − a^{1−α})), tending to 1/(α − 1);
    /// `a = inf` gives the tail form with I(∞) − I(b) over L(b)·b^{1−α}.
    pub fn karamata_ratio(&self, a: f64, b: f64) -> Result<f64> {
        let alpha = self.alpha();
        if alpha == 1.0 {
            return Err(Error::unsupported("karamata_ratio excludes alpha = 1"));
        }
        let l_b = self.slowly_varying_part(b);
        let power = |x: f64| if x.is_infinite() { 0.0 } else { x.powf(1.0 - alpha) };
        if alpha < 1.0 {
            if !(0.0 <= a && a < b && b.is_finite()) {
                return Err(Error::invalid(format!("alpha < 1 needs 0 <= a < b, got a={a}, b={b}")));
            }
            let num = quad::integrate(|s| self.eval(s), a, b, DEFAULT_TOL)?.value;
            Ok(num / (l_b * (power(b) - power(a))))
        } else {
            if !(b > 0.0 && a > b) {
                return Err(Error::invalid(format!("alpha > 1 needs 0 < b < a, got a={a}, b={b}")));
            }
            let num = if a.is_infinite() {
                self.tail_integral(b, DEFAULT_TOL * 1e-6 * (1.0 + b * self.eval(b)))?
            } else {
                quad::integrate(|s| self.eval(s), b, a, DEFAULT_TOL * 1e-6)?.value
            };
            Ok(num / (l_b * (power(b) - power(a))))
        }
    }

    /// Σ_{ℓ=1}^{⌈T/M⌉} ρ(ℓM) with M = μ·I_ρ(T); tends to 1/μ.
    pub fn riemann_limit(&self, mu: f64, t: f64) -> Result<f64> {
        let alpha = self.alpha();
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {mu}")));
        }
        if alpha > 1.0 {
            return Err(Error::unsupported("riemann_limit needs alpha in [0, 1]"));
        }
        if alpha == 0.0 && self.eval(1e300) > 1e-3 {
            return Err(Error::unsupported("riemann_limit with alpha = 0 needs rho -> 0"));
        }
        if alpha == 1.0 && matches!(self.primitive_infty(DEFAULT_TOL), Ok(Tail::Finite { .. })) {
            return Err(Error::unsupported("riemann_limit with alpha = 1 needs I_rho(inf) = inf"));
        }
        let m = mu * self.primitive(t, DEFAULT_TOL)?;
        let n = (t / m).ceil() as u64;
        Ok((1..=n).map(|l| self.eval(l as f64 * m)).sum())
    }
}

impl fmt::Display for RegVarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::PowerLaw { alpha, scale } => write!(f, "power_law(alpha={alpha}, scale={scale})"),
            Family::PowerLog { alpha, beta } => write!(f, "power_log(alpha={alpha}, beta={beta})"),
            Family::Reciprocal => write!(f, "reciprocal"),
            Family::Exponentialized { alpha, kappa, theta } => {
                write!(f, "exponentialized(alpha={alpha}, kappa={kappa}, theta={theta})")
            }
            Family::PowerTail { alpha } => write!(f, "power_tail(alpha={alpha})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    PowerLaw,
    PowerLog,
    Reciprocal,
    Exponentialized,
    PowerTail,
}

/// Serialized form `{family, alpha, params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

impl TryFrom<FamilySpec> for RegVarFn {
    type Error = Error;

    fn try_from(spec: FamilySpec) -> Result<Self> {
        let param = |name: &str, default: Option<f64>| -> Result<f64> {
            spec.params
                .get(name)
                .copied()
                .or(default)
                .ok_or_else(|| Error::InvalidSpec(format!("{:?} needs param `{name}`", spec.family)))
        };
        let alpha = || spec.alpha.ok_or_else(|| Error::InvalidSpec(format!("{:?} needs alpha", spec.family)));
        let family = match spec.family {
            FamilyKind::PowerLaw => Family::PowerLaw { alpha: alpha()?, scale: param("scale", Some(1.0))? },
            FamilyKind::PowerLog => Family::PowerLog { alpha: alpha()?, beta: param("beta", None)? },
            FamilyKind::Reciprocal => {
                if spec.alpha.is_some_and(|a| a != 1.0) {
                    return Err(Error::InvalidSpec("reciprocal has alpha = 1".into()));
                }
                Family::Reciprocal
            }
            FamilyKind::Exponentialized => Family::Exponentialized {
                alpha: alpha()?,
                kappa: param("kappa", None)?,
                theta: param("theta", None)?,
            },
            FamilyKind::PowerTail => Family::PowerTail { alpha: alpha()? },
        };
        RegVarFn::new(family)
    }
}

impl From<RegVarFn> for FamilySpec {
    fn from(f: RegVarFn) -> Self {
        let mut params = BTreeMap::new();
        let (family, alpha) = match f.family {
            Family::PowerLaw { alpha, scale } => {
                params.insert("scale".to_string(), scale);
                (FamilyKind::PowerLaw, Some(alpha))
            }
            Family::PowerLog { alpha, beta } => {
                params.insert("beta".to_string(), beta);
                (FamilyKind::PowerLog, Some(alpha))
            }
            Family::Reciprocal => (FamilyKind::Reciprocal, Some(1.0)),
            Family::Exponentialized { alpha, kappa, theta } => {
                params.insert("kappa".to_string(), kappa);
                params.insert("theta".to_string(), theta);
                (FamilyKind::Exponentialized, Some(alpha))
            }
            Family::PowerTail { alpha } => (FamilyKind::PowerTail, Some(alpha)),
        };
        FamilySpec { family, alpha, params }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn primitive_examples() {
        let c = RegVarFn::constant();
        assert!(close(c.primitive(5.0, DEFAULT_TOL).unwrap(), 5.0, 1e-10));
        let half = RegVarFn::power_law(0.5).unwrap();
        // 2(√(1+t) − 1)
        assert!(close(half.primitive(3.0, DEFAULT_TOL).unwrap(), 2.0, 1e-10));
        let rec = RegVarFn::reciprocal();
        // log(1 + t)
        assert!(close(rec.primitive(E - 1.0, DEFAULT_TOL).unwrap(), 1.0, 1e-10));
    }

    #[test]
    fn primitive_matches_closed_form_far_out() {
        let f = RegVarFn::power_law(0.5).unwrap();
        for &t in &[0.3, 1.0, 7.5, 1e3, 1e6, 1e8] {
            let exact = 2.0 * ((1.0f64 + t).sqrt() - 1.0);
            let got = f.primitive(t, DEFAULT_TOL).unwrap();
            assert!(close(got, exact, 1e-10_f64.max(1e-14 * exact)), "t={t}: {got} vs {exact}");
        }
        let pl = RegVarFn::power_log(1.0, 1.0).unwrap();
        for &t in &[2.0, 1e4, 1e9] {
            // d/dt log(1 + log(1+t)) = 1/((1+t)(1+log(1+t)))
            let exact = (t as f64).ln_1p().ln_1p();
            assert!(close(pl.primitive(t, DEFAULT_TOL).unwrap(), exact, 1e-10));
        }
    }

    #[test]
    fn primitive_rejects_bad_input() {
        let f = RegVarFn::constant();
        assert!(f.primitive(-1.0, DEFAULT_TOL).is_err());
        assert!(f.primitive(1.0, 0.0).is_err());
    }

    #[test]
    fn table_is_strictly_increasing_and_below_limit() {
        let f = RegVarFn::power_law(2.0).unwrap();
        f.primitive(1e5, DEFAULT_TOL).unwrap();
        let table = f.table(DEFAULT_TOL).unwrap();
        assert!(table.values.windows(2).all(|w| w[1] > w[0]));
        let lim = f.primitive_infty(DEFAULT_TOL).unwrap().finite().unwrap();
        assert!(table.values.iter().all(|&v| v < lim));
    }

    #[test]
    fn primitive_infty_examples() {
        let two = RegVarFn::power_law(2.0).unwrap();
        let v = two.primitive_infty(DEFAULT_TOL).unwrap();
        assert!(close(v.finite().unwrap(), 1.0, 1e-9), "{v:?}");
        let three = RegVarFn::power_law(3.0).unwrap();
        assert!(close(three.primitive_infty(DEFAULT_TOL).unwrap().finite().unwrap(), 0.5, 1e-9));
        let half = RegVarFn::power_law(0.5).unwrap();
        assert_eq!(half.primitive_infty(DEFAULT_TOL).unwrap(), Tail::Divergent);
        assert_eq!(RegVarFn::reciprocal().primitive_infty(DEFAULT_TOL).unwrap(), Tail::Divergent);
    }

    #[test]
    fn primitive_infty_at_unit_index() {
        // ∫₀^∞ ds/((1+s)(1+log(1+s))²) = 1
        let conv = RegVarFn::power_log(1.0, 2.0).unwrap();
        assert!(close(conv.primitive_infty(DEFAULT_TOL).unwrap().finite().unwrap(), 1.0, 1e-9));
        let div = RegVarFn::power_log(1.0, 1.0).unwrap();
        assert_eq!(div.primitive_infty(DEFAULT_TOL).unwrap(), Tail::Divergent);
        let undecided = RegVarFn::new(Family::Exponentialized { alpha: 1.0, kappa: 1.0, theta: 0.5 }).unwrap();
        assert!(matches!(undecided.primitive_infty(DEFAULT_TOL), Err(Error::Undecided(_))));
    }

    #[test]
    fn decay_rate_examples() {
        let rec = RegVarFn::reciprocal();
        let t = E.powf(E) - 1.0;
        assert!(close(rec.decay_rate(t).unwrap(), t / E, 1e-9));
        let half = RegVarFn::power_law(0.5).unwrap();
        assert!(close(half.decay_rate(3.0).unwrap(), 1.5 * 2f64.ln(), 1e-9));
        assert!(matches!(half.decay_rate(0.5), Err(Error::DomainTooSmall { .. })));
    }

    #[test]
    fn rv_index_examples() {
        let half = RegVarFn::power_law(0.5).unwrap();
        assert!(half.rv_index_check(&[2.0], &[1e6]).unwrap() < 1e-3);
        assert_eq!(RegVarFn::constant().rv_index_check(&[0.3, 7.0], &[1.0, 10.0]).unwrap(), 0.0);
        let pl = RegVarFn::power_log(1.0, 1.0).unwrap();
        // logarithmic factors converge slowly: at t = 1e8 the deviation is
        // 4^{-1}(1 − (1+log(1+t))/(1+log(1+4t))) ≈ 0.0167
        let t = 1e8_f64;
        let exact = 0.25 * ((1.0 + t) / (1.0 + 4.0 * t) * 4.0 * (1.0 + t.ln_1p()) / (1.0 + (4.0 * t).ln_1p()) - 1.0).abs();
        assert!(close(pl.rv_index_check(&[4.0], &[t]).unwrap(), exact, 1e-12));
        assert!(pl.rv_index_check(&[4.0], &[1e30]).unwrap() < 1e-2);
        // deviation shrinks as the grid moves right
        let near = half.rv_index_check(&[0.5, 2.0], &[10.0, 20.0]).unwrap();
        let far = half.rv_index_check(&[0.5, 2.0], &[1e4, 2e4]).unwrap();
        assert!(far < near);
    }

    #[test]
    fn karamata_examples() {
        let half = RegVarFn::power_law(0.5).unwrap();
        assert!((half.karamata_ratio(0.0, 1e6).unwrap() / 2.0 - 1.0).abs() < 0.01);
        let two = RegVarFn::power_law(2.0).unwrap();
        assert!((two.karamata_ratio(f64::INFINITY, 1e6).unwrap() - 1.0).abs() < 0.01);
        // exact power law on [1, ∞): I(b) − I(1) = 2(√b − 1), L ≡ 1
        let exact = RegVarFn::power_tail(0.5).unwrap();
        assert!(close(exact.karamata_ratio(1.0, 1e6).unwrap(), 2.0, 1e-9));
        assert!(close(exact.karamata_ratio(0.0, 1e6).unwrap(), 2.0 - 1e-3, 1e-9));
        assert!(matches!(RegVarFn::reciprocal().karamata_ratio(0.0, 1.0), Err(Error::Unsupported(_))));
        assert!(half.karamata_ratio(2.0, 1.0).is_err());
    }

    #[test]
    fn riemann_examples() {
        let half = RegVarFn::power_law(0.5).unwrap();
        let one = half.riemann_limit(1.0, 1e8).unwrap();
        let two = half.riemann_limit(2.0, 1e8).unwrap();
        assert!((one - 1.0).abs() < 0.02, "{one}");
        assert!((two - 0.5).abs() < 0.01, "{two}");
        let ten = half.riemann_limit(10.0, 1e8).unwrap();
        assert!(ten < two && two < one);
        assert!(RegVarFn::constant().riemann_limit(1.0, 1e4).is_err());
        assert!(RegVarFn::power_law(2.0).unwrap().riemann_limit(1.0, 1e4).is_err());
    }

    #[test]
    fn spec_roundtrip_and_validation() {
        let json = r#"{"family":"power_log","alpha":0.5,"params":{"beta":2.0}}"#;
        let f: RegVarFn = serde_json::from_str(json).unwrap();
        assert_eq!(*f.family(), Family::PowerLog { alpha: 0.5, beta: 2.0 });
        let back: RegVarFn = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<RegVarFn>(r#"{"family":"power_law","alpha":-1}"#).is_err());
        assert!(serde_json::from_str::<RegVarFn>(r#"{"family":"power_log","alpha":1}"#).is_err());
    }
}
