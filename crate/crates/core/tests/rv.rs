use persistlab::experiment::envelope_tables;
use persistlab::rv::{RegVarFn, Tail, DEFAULT_TOL};
use persistlab::Error;
use std::f64::consts::E;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn primitive_values() {
    assert!(close(RegVarFn::constant().primitive(5.0, DEFAULT_TOL).unwrap(), 5.0, 1e-10));
    assert!(close(RegVarFn::power_law(0.5).unwrap().primitive(3.0, DEFAULT_TOL).unwrap(), 2.0, 1e-10));
    assert!(close(RegVarFn::reciprocal().primitive(E - 1.0, DEFAULT_TOL).unwrap(), 1.0, 1e-10));
}

#[test]
fn primitive_at_infinity() {
    let two = RegVarFn::power_law(2.0).unwrap().primitive_infty(DEFAULT_TOL).unwrap();
    assert!(close(two.finite().unwrap(), 1.0, 1e-9));
    let three = RegVarFn::power_law(3.0).unwrap().primitive_infty(DEFAULT_TOL).unwrap();
    assert!(close(three.finite().unwrap(), 0.5, 1e-9));
    assert_eq!(RegVarFn::power_law(0.5).unwrap().primitive_infty(DEFAULT_TOL).unwrap(), Tail::Divergent);
}

#[test]
fn decay_rate_values() {
    let t = E.powf(E) - 1.0;
    let v = RegVarFn::reciprocal().decay_rate(t).unwrap();
    assert!(close(v, t / E, 1e-9) && close(v, 5.209, 5e-3));
    assert!(close(RegVarFn::power_law(0.5).unwrap().decay_rate(3.0).unwrap(), 1.5 * 2f64.ln(), 1e-9));
    // reciprocal: a(T) = T·log log(1+T) / log(1+T)
    let rec = RegVarFn::reciprocal();
    for &t in &[1e3, 1e6, 1e9] {
        let l = (t as f64).ln_1p();
        assert!(close(rec.decay_rate(t).unwrap() / (t * l.ln() / l), 1.0, 1e-9));
    }
}

#[test]
fn regular_variation_of_index() {
    let half = RegVarFn::power_law(0.5).unwrap();
    assert!(half.rv_index_check(&[2.0], &[1e6]).unwrap() < 1e-3);
    assert_eq!(RegVarFn::constant().rv_index_check(&[0.5, 3.0, 10.0], &[1.0, 100.0]).unwrap(), 0.0);
    // with logarithmic corrections the deviation at 1e8 is still about 0.0167
    let pl = RegVarFn::power_log(1.0, 1.0).unwrap();
    let t = 1e8_f64;
    let exact = 0.25 * ((1.0 + t) / (1.0 + 4.0 * t) * 4.0 * (1.0 + t.ln_1p()) / (1.0 + (4.0 * t).ln_1p()) - 1.0).abs();
    assert!(close(pl.rv_index_check(&[4.0], &[t]).unwrap(), exact, 1e-12));
    assert!(exact > 1e-2 && exact < 2e-2);
}

#[test]
fn karamata_and_riemann() {
    let half = RegVarFn::power_law(0.5).unwrap();
    assert!((half.karamata_ratio(0.0, 1e6).unwrap() / 2.0 - 1.0).abs() < 0.01);
    assert!((RegVarFn::power_law(2.0).unwrap().karamata_ratio(f64::INFINITY, 1e6).unwrap() - 1.0).abs() < 0.01);
    let exact = RegVarFn::power_tail(0.5).unwrap();
    assert!(close(exact.karamata_ratio(1.0, 1e6).unwrap(), 2.0, 1e-9));
    assert!(close(half.riemann_limit(1.0, 1e8).unwrap(), 1.0, 0.02));
    assert!(close(half.riemann_limit(2.0, 1e8).unwrap(), 0.5, 0.01));
    let sums: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|&m| half.riemann_limit(m, 1e8).unwrap()).collect();
    assert!(sums.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn unit_index_is_excluded_from_karamata() {
    assert!(matches!(RegVarFn::reciprocal().karamata_ratio(0.0, 10.0), Err(Error::Unsupported(_))));
}

#[test]
fn primitive_is_regularly_varying() {
    for &(a, expo) in &[(0.3, 0.7), (0.5, 0.5), (2.0, 0.0)] {
        let f = RegVarFn::power_law(a).unwrap();
        let r = f.primitive(2e8, DEFAULT_TOL).unwrap() / f.primitive(1e8, DEFAULT_TOL).unwrap();
        assert!(close(r, 2f64.powf(expo), 1e-3), "alpha={a}: {r}");
    }
    // I(T)/(Tρ(T)) → 1/(1−α)
    let f = RegVarFn::power_law(0.3).unwrap();
    let t = 1e8;
    assert!(close(f.primitive(t, DEFAULT_TOL).unwrap() / (t * f.eval(t)), 1.0 / 0.7, 1e-2));
}

#[test]
fn quadrature_is_bitwise_reproducible() {
    let a = RegVarFn::power_log(0.4, 2.0).unwrap().primitive(98765.4, DEFAULT_TOL).unwrap();
    let b = RegVarFn::power_log(0.4, 2.0).unwrap().primitive(98765.4, DEFAULT_TOL).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn envelopes() {
    let ts = [10.0, 100.0, 1e3, 1e4, 1e5];
    let half = envelope_tables(&ts, &RegVarFn::power_law(0.5).unwrap()).unwrap();
    assert!(half.windows(2).all(|w| w[1].lower > w[0].lower && w[1].upper > w[0].upper));
    assert!(half.iter().all(|r| r.lower > 0.0 && r.upper > r.lower));
    // a_ρ(T)·ρ(T)/log T stays within a fixed band
    let band: Vec<f64> = half.iter().map(|r| r.a_rho * (1.0 + r.t).powf(-0.5) / r.t.ln()).collect();
    let (lo, hi) = band.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    assert!(hi / lo < 2.0, "{band:?}");
    // ρ = 1/(1+t): a_ρ separates from both envelopes
    let rec = envelope_tables(&[1e4, 1e8, 1e16], &RegVarFn::reciprocal()).unwrap();
    let lo_ratio: Vec<f64> = rec.iter().map(|r| r.a_rho / r.lower).collect();
    let hi_ratio: Vec<f64> = rec.iter().map(|r| r.upper / r.a_rho).collect();
    assert!(lo_ratio.windows(2).all(|w| w[1] > w[0]));
    assert!(hi_ratio.windows(2).all(|w| w[1] > w[0]));
    assert!(envelope_tables(&ts, &RegVarFn::power_law(1.5).unwrap()).is_err());
}
