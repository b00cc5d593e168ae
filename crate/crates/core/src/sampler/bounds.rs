use super::ghk::{ghk_prefix, PackedLower};
use super::{MCEstimate, Method};
use crate::error::{Error, Result};
use crate::kernel::{GramResult, Kernel, JITTER_CAP};
use crate::normal::cdf;
use crate::rng::derive_seed;

/// Product over blocks of per-block persistence estimates. With
/// non-negative correlations this is a lower bound for the persistence of
/// the whole grid. `starts` lists the indices at which new blocks begin.
pub fn slepian_product_bound(
    k: &Kernel,
    grid: &[f64],
    starts: &[usize],
    level: f64,
    n: usize,
    seed: u64,
) -> Result<MCEstimate> {
    let a = k.corr_matrix(grid)?;
    if let Some(v) = a.iter().copied().find(|&v| v < -1e-12) {
        return Err(Error::unsupported(format!("negative correlation {v} on grid")));
    }
    let m = grid.len();
    let mut cuts = vec![0];
    for &s in starts {
        if s == 0 || s >= m || s <= *cuts.last().unwrap() {
            return Err(Error::invalid(format!("block starts must increase strictly within (0, {m})")));
        }
        cuts.push(s);
    }
    cuts.push(m);
    let mut log_p = 0.0;
    let mut rel2 = 0.0;
    for (b, w) in cuts.windows(2).enumerate() {
        let block = a.view((w[0], w[0]), (w[1] - w[0], w[1] - w[0])).into_owned();
        let gram = GramResult::factor(block, JITTER_CAP)?;
        let est = *ghk_prefix(&PackedLower::from_matrix(&gram.cholesky), level, n, derive_seed(seed, b as u64))?
            .last()
            .expect("non-empty block");
        log_p += est.log_p;
        rel2 += est.rel_stderr().powi(2);
    }
    Ok(MCEstimate {
        p_hat: log_p.exp(),
        log_p,
        stderr: (log_p + 0.5 * rel2.ln()).exp(),
        n,
        method: Method::SeqIs,
        seed,
        grid_size: m,
    })
}

/// Φ(−r ε^{−1/2}) + Φ(3r)ⁿ, an upper bound on the probability that `n`
/// unit-variance Gaussians with pairwise correlations ≤ ε stay below `r`.
pub fn union_upper_bound(eps: f64, n: u64, r: f64) -> Result<f64> {
    if !(0.0..5.0 / 9.0).contains(&eps) {
        return Err(Error::invalid(format!("correlation bound must lie in [0, 5/9), got {eps}")));
    }
    let first = if eps == 0.0 {
        if r > 0.0 { 0.0 } else if r < 0.0 { 1.0 } else { 0.5 }
    } else {
        cdf(-r / eps.sqrt())
    };
    Ok(first + (n as f64 * cdf(3.0 * r).ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn union_bound_examples() {
        let v = union_upper_bound(0.25, 1, 1.0).unwrap();
        assert!((v - (cdf(-2.0) + cdf(3.0))).abs() < 1e-15);
        assert!(union_upper_bound(0.6, 1, 1.0).is_err());
        let small = union_upper_bound(1e-12, 10, 0.5).unwrap();
        assert!((small - cdf(1.5).powi(10)).abs() < 1e-12);
    }
}
