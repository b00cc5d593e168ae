use nalgebra::SymmetricEigen;
use persistlab::experiment::sqrt_h_extrapolate;
use persistlab::kernel::{lamperti_corr, Kernel};
use persistlab::rv::{RegVarFn, DEFAULT_TOL};
use persistlab::sampler::{orthant_exact_small, union_upper_bound};
use persistlab::walk::{JumpKernel, LatticeWalk};
use proptest::prelude::*;
use std::sync::OnceLock;

fn walk1() -> &'static LatticeWalk {
    static W: OnceLock<LatticeWalk> = OnceLock::new();
    W.get_or_init(|| LatticeWalk::new(JumpKernel::srw(1)).unwrap())
}

fn rho_strategy() -> impl Strategy<Value = RegVarFn> {
    prop_oneof![
        (0.0..0.95f64).prop_map(|a| RegVarFn::power_law(a).unwrap()),
        (1.05..3.0f64).prop_map(|a| RegVarFn::power_law(a).unwrap()),
        ((0.05..0.9f64), (0.0..2.0f64)).prop_map(|(a, b)| RegVarFn::power_log(a, b).unwrap()),
        Just(RegVarFn::reciprocal()),
    ]
}

fn kernel_strategy() -> impl Strategy<Value = Kernel> {
    prop_oneof![
        rho_strategy().prop_map(Kernel::interface),
        (0.0..0.95f64).prop_map(|a| Kernel::stationary_cm(RegVarFn::power_law(a).unwrap()).unwrap()),
        (0.0..0.99f64).prop_map(|g| Kernel::lamperti(g).unwrap()),
        (0.1..5.0f64).prop_map(|t| Kernel::ou(t).unwrap()),
        (0.5..0.95f64).prop_map(|h| Kernel::fou(h).unwrap()),
    ]
}

/// Moves a time into the kernel's domain.
fn shift(k: &Kernel, t: f64) -> f64 {
    t + k.t_min().max(0.0)
}

fn sorted_grid(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1..10.0f64, 2..n).prop_map(|mut g| {
        g.sort_by(f64::total_cmp);
        g.dedup_by(|a, b| (*a - *b).abs() < 0.05);
        g
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn primitive_is_increasing(rho in rho_strategy(), a in 0.0..1e4f64, d in 0.01..1e4f64) {
        let lo = rho.primitive(a, DEFAULT_TOL).unwrap();
        let hi = rho.primitive(a + d, DEFAULT_TOL).unwrap();
        prop_assert!(hi > lo && lo >= 0.0);
    }

    #[test]
    fn rho_is_positive_and_nonincreasing(rho in rho_strategy(), s in 0.0..1e6f64, d in 0.0..1e3f64) {
        let (a, b) = (rho.eval(s), rho.eval(s + d));
        prop_assert!(a > 0.0 && a <= 1.0 && b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn correlations_lie_in_unit_interval(k in kernel_strategy(), s in 0.05..50.0f64, t in 0.05..50.0f64) {
        let (s, t) = (shift(&k, s), shift(&k, t));
        let c = k.corr(s, t).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&c), "{k}: {c}");
        prop_assert!((c - k.corr(t, s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn correlation_matrices_are_psd(k in kernel_strategy(), g in sorted_grid(12)) {
        let g: Vec<f64> = g.iter().map(|&t| shift(&k, t)).collect();
        let a = k.corr_matrix(&g).unwrap();
        let min = SymmetricEigen::new(a).eigenvalues.min();
        prop_assert!(min > -1e-9, "{k}: {min}");
    }

    #[test]
    fn conditional_covariance_is_psd(k in kernel_strategy(), g in sorted_grid(10), v in -2.0..2.0f64) {
        prop_assume!(g.len() >= 3);
        let g: Vec<f64> = g.iter().map(|&t| shift(&k, t)).collect();
        let obs = vec![0, g.len() / 2];
        let (mean, cov) = k.conditional_law(&g, &obs, &[v, -v]).unwrap();
        prop_assert!(mean.iter().all(|m| m.is_finite()));
        let min = SymmetricEigen::new(cov).eigenvalues.min();
        prop_assert!(min > -1e-8, "{k}: {min}");
    }

    #[test]
    fn lamperti_is_decreasing_in_lag(gamma in 0.0..0.99f64, tau in 0.0..30.0f64, d in 0.01..5.0f64) {
        let (a, b) = (lamperti_corr(gamma, tau), lamperti_corr(gamma, tau + d));
        prop_assert!(b < a && b > 0.0 && a <= 1.0);
    }

    #[test]
    fn lattice_gamma_is_symmetric_positive(s in 0.05..40.0f64, t in 0.05..40.0f64) {
        let w = walk1();
        let g = w.gamma(s, t).unwrap();
        prop_assert!(g > 0.0);
        prop_assert!((g - w.gamma(t, s).unwrap()).abs() <= 1e-12 * g.max(1.0));
        let (_, c) = w.gamma_corr(s, t).unwrap();
        prop_assert!(c > 0.0 && c <= 1.0);
    }

    #[test]
    fn lattice_gamma_grows_with_min(s in 0.05..30.0f64, lag in 0.0..10.0f64, d in 0.05..5.0f64) {
        let w = walk1();
        prop_assert!(w.gamma(s + d, s + d + lag).unwrap() > w.gamma(s, s + lag).unwrap());
    }

    #[test]
    fn return_probability_is_a_probability(d in 1usize..4, u in 0.0..300.0f64) {
        let p = LatticeWalk::new(JumpKernel::srw(d)).unwrap().rho(u);
        prop_assert!(p > 0.0 && p <= 1.0);
    }

    #[test]
    fn bivariate_orthant_is_monotone(r in -0.95..0.9f64, dr in 0.01..0.05f64) {
        let m = |r: f64| nalgebra::DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
        let (a, b) = (orthant_exact_small(&m(r)).unwrap(), orthant_exact_small(&m(r + dr)).unwrap());
        prop_assert!(b > a && a > 0.0 && b < 0.5);
    }

    #[test]
    fn union_bound_is_monotone_in_eps(eps in 0.0..0.5f64, de in 0.0..0.05f64, n in 1u64..500, r in 0.0..2.0f64) {
        let (a, b) = (union_upper_bound(eps, n, r).unwrap(), union_upper_bound(eps + de, n, r).unwrap());
        prop_assert!(b >= a - 1e-15);
    }

    #[test]
    fn extrapolation_recovers_sqrt_h_model(s0 in -5.0..5.0f64, c in -5.0..5.0f64, h in 0.001..1.0f64) {
        let s = |h: f64| s0 + c * h.sqrt();
        prop_assert!((sqrt_h_extrapolate(s(h), s(h / 2.0)) - s0).abs() < 1e-9);
    }
}
