//! Acceptance criteria 1–10. Each test prints one line
//! `criterion N: PASS|FAIL <details>` and fails if the criterion does.
//! Reference values come from this package or closed forms, not from
//! the library under test.

use persistlab::experiment::{self, ExperimentSpec, Report, SpecFile};
use persistlab::langevin::{self, LangevinConfig};
use persistlab::kernel::{lamperti_corr, Kernel};
use persistlab::rv::RegVarFn;
use persistlab::verify::{self, Suite};
use persistlab::walk::{JumpKernel, LatticeWalk};
use persistlab_validation::{bessel_i0_scaled, simpson};
use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::OnceLock;

fn report(n: u32, pass: bool, detail: String) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} failed: {detail}");
}

fn bundled() -> &'static SpecFile {
    static SPECS: OnceLock<SpecFile> = OnceLock::new();
    SPECS.get_or_init(|| {
        let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs/bundled.toml");
        SpecFile::load(&p).expect("bundled spec set loads")
    })
}

fn spec(name: &str) -> &'static ExperimentSpec {
    bundled().experiment.iter().find(|e| e.name == name).expect("experiment present")
}

fn run(name: &str) -> Report {
    experiment::run(spec(name)).expect("experiment runs")
}

#[test]
fn criterion_01_ou_closed_form() {
    let r = run("ou_anchor");
    let mut pass = true;
    let mut parts = Vec::new();
    for row in &r.rows {
        let oracle = (-row.t).exp().asin() / PI;
        let z = (row.p_hat - oracle).abs() / row.stderr;
        pass &= z <= 3.0;
        parts.push(format!("T={} p={:.5} oracle={:.5} z={:.1}", row.t, row.p_hat, oracle, z));
    }
    report(1, pass, parts.join("; "));
}

#[test]
fn criterion_02_ou_rate() {
    let r = run("ou_rate");
    let slopes: Vec<f64> = r.fits.iter().map(|f| f.fit.as_ref().expect("fit").slope).collect();
    let ex = &r.extrapolated;
    let b = *ex.last().expect("two resolutions");
    let stable = ex.len() >= 2 && (ex[ex.len() - 1] - ex[ex.len() - 2]).abs() <= 0.05;
    let pass = stable && (0.9..=1.1).contains(&b);
    report(2, pass, format!("slopes at h, h/2, h/4 = {slopes:.4?}; extrapolated = {ex:.4?}; target [0.9, 1.1]"));
}

#[test]
fn criterion_03_lamperti_half() {
    let worst = (0..=2000)
        .map(|i| i as f64 * 0.025)
        .map(|t| (lamperti_corr(0.0, t) - (-0.5 * t).exp()).abs())
        .fold(0.0, f64::max);
    let ou = Kernel::ou(0.5).unwrap();
    let lam = Kernel::lamperti(0.0).unwrap();
    let grid: Vec<f64> = (0..50).map(|i| i as f64 * 0.37).collect();
    let diff = (lam.corr_matrix(&grid).unwrap() - ou.corr_matrix(&grid).unwrap()).amax();
    let r = run("interface_constant");
    let slope = r.fits[0].fit.as_ref().expect("fit").slope;
    let pass = worst <= 1e-12 && diff <= 1e-12 && (0.45..=0.55).contains(&slope);
    report(3, pass, format!("max |C*_0 − OU(1/2)| = {:.1e} (matrix {:.1e}); per-log-T slope = {slope:.4} in [0.45, 0.55]", worst, diff));
}

fn stationary_rows() -> &'static Report {
    static R: OnceLock<Report> = OnceLock::new();
    R.get_or_init(|| run("stationary_power_half"))
}

/// a_ρ(T) for ρ = (1+τ)^{−1/2}, where I(T) = 2(√(1+T) − 1).
fn a_rho_half(t: f64) -> f64 {
    let i = 2.0 * ((1.0 + t).sqrt() - 1.0);
    t * i.ln() / i
}

#[test]
fn criterion_04_main_rate() {
    let rows = &stationary_rows().rows;
    let ratios: Vec<f64> = rows.iter().map(|r| -r.log_p / a_rho_half(r.t)).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = min > 0.0 && max.is_finite() && max / min <= 2.0;
    report(4, pass, format!("−log p/a_rho at T=50,100,200,400: {ratios:.4?}; max/min = {:.3} <= 2", max / min));
}

#[test]
fn criterion_05_envelope_gap() {
    let rows = &stationary_rows().rows;
    let rho = RegVarFn::power_law(0.5).unwrap();
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let env = experiment::envelope_tables(&ts, &rho).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (r, e) in rows.iter().zip(&env) {
        let m = -r.log_p;
        let lower = 0.5 * r.t.sqrt();
        let ratio = m / a_rho_half(r.t);
        pass &= (e.lower - r.t.sqrt()).abs() < 1e-9 * e.lower && (e.a_rho - a_rho_half(r.t)).abs() < 1e-6 * e.a_rho;
        pass &= m > lower && (0.25..=4.0).contains(&ratio);
        parts.push(format!("T={} −log p={:.2} > {:.2}, /a_rho={:.3}", r.t, m, lower, ratio));
    }
    report(5, pass, parts.join("; "));
}

#[test]
fn criterion_06_karamata() {
    let mut pass = true;
    let mut parts = Vec::new();
    for &a in &[0.3, 0.5, 0.8] {
        let v = RegVarFn::power_law(a).unwrap().karamata_ratio(0.0, 1e6).unwrap();
        let t = 1.0 / (1.0 - a);
        let ok = (v - t).abs() <= 0.01 * t;
        pass &= ok;
        parts.push(format!("alpha={a}: {v:.4} vs {t:.4}{}", if ok { "" } else { " (off)" }));
    }
    for &a in &[1.5, 2.0, 3.0] {
        let v = RegVarFn::power_law(a).unwrap().karamata_ratio(f64::INFINITY, 1e6).unwrap();
        let t = 1.0 / (a - 1.0);
        let ok = (v - t).abs() <= 0.01 * t;
        pass &= ok;
        parts.push(format!("alpha={a}: {v:.4} vs {t:.4}{}", if ok { "" } else { " (off)" }));
    }
    for &mu in &[0.5, 1.0, 2.0] {
        let v = RegVarFn::power_law(0.5).unwrap().riemann_limit(mu, 1e8).unwrap();
        let ok = (v * mu - 1.0).abs() <= 0.02;
        pass &= ok;
        parts.push(format!("mu={mu}: {v:.4} vs {:.4}{}", 1.0 / mu, if ok { "" } else { " (off)" }));
    }
    report(6, pass, parts.join("; "));
}

#[test]
fn criterion_07_lattice_walk() {
    let w1 = LatticeWalk::new(JumpKernel::srw(1)).unwrap();
    let worst = (0..=1000).map(|i| i as f64 * 0.05).map(|u| (w1.rho(u) - bessel_i0_scaled(u)).abs()).fold(0.0, f64::max);
    let w3 = LatticeWalk::new(JumpKernel::srw(3)).unwrap();
    let series = w3.green(0).unwrap();
    let renewal = 1.0 / (1.0 - w3.table().first_return_probability().unwrap());
    let pass = worst <= 1e-10 && (series.value - 1.5164).abs() <= 1e-3 && (renewal - 1.5164).abs() <= 1e-3;
    report(
        7,
        pass,
        format!(
            "max |rho − Bessel| on [0,50] = {worst:.1e}; G_0 series = {:.6} (tail bound {:.1e}), renewal = {renewal:.6}",
            series.value, series.tail_bound
        ),
    );
}

fn srw1_cfg(l: usize, replicates: usize, seed: u64) -> LangevinConfig {
    LangevinConfig {
        d: 1,
        l,
        q: JumpKernel::srw(1),
        dt: 0.01,
        t_max: 2.0,
        replicates,
        seed,
        pairs: vec![(1.0, 2.0), (1.0, 1.0)],
        interval: None,
        allow_wrap: l == 1,
    }
}

#[test]
fn criterion_08_langevin_covariance() {
    // Γ(1,2) = ∫_1^3 e^{−u} I₀(u) du
    let gamma = simpson(bessel_i0_scaled, 1.0, 3.0, 2000);
    let c = langevin::run_cov(&srw1_cfg(512, 2000, 81)).unwrap()[0];
    let z = (c.cov - gamma).abs() / c.stderr;
    let v = langevin::run_cov(&srw1_cfg(1, 2000, 82)).unwrap()[1];
    let zv = (v.cov - 2.0).abs() / v.stderr;
    let pass = z <= 4.0 && zv <= 3.0;
    report(
        8,
        pass,
        format!(
            "Cov(g1,g2) = {:.4} ± {:.4} vs Gamma(1,2) = {gamma:.6} (z = {z:.2}); L=1 Var(g1) = {:.4} ± {:.4} vs 2 (z = {zv:.2})",
            c.cov, c.stderr, v.cov, v.stderr
        ),
    );
}

#[test]
fn criterion_09_sde_vs_kernel() {
    let k = run("lattice_d1_kernel");
    let s = run("lattice_d1_sde");
    let mut pass = true;
    let mut parts = Vec::new();
    let (a, b) = (k.rows.last().unwrap(), s.rows.last().unwrap());
    let z = (a.p_hat - b.p_hat).abs() / a.stderr.hypot(b.stderr);
    pass &= z <= 3.0;
    parts.push(format!("[1,16]: kernel {:.5} sde {:.5} z = {z:.2}", a.p_hat, b.p_hat));
    for (label, r) in [("kernel", &k), ("sde", &s)] {
        let ratios: Vec<f64> = r.rows.iter().filter(|x| [4.0, 8.0, 16.0].contains(&x.t)).map(|x| x.ratio).collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let ok = ratios.len() == 3 && ratios.iter().all(|&x| x > 0.0 && (x / mean - 1.0).abs() <= 0.2);
        pass &= ok;
        parts.push(format!("{label} −log p/log T at 4,8,16 = {ratios:.3?}"));
    }
    report(9, pass, parts.join("; "));
}

#[test]
fn criterion_10_property_suites() {
    let checks = verify::verify(Suite::All);
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.to_string()).collect();
    let needed = [
        "sampler/slepian_product_bound",
        "sampler/arcsine_r_grid",
        "sampler/borell_tis",
        "kernels/conditional_markov_ou",
        "kernels/lamperti_limit_gamma_0.5",
        "kernels/fou_plateau_h_0.75",
    ];
    let present = needed.iter().all(|n| checks.iter().any(|c| format!("{}/{}", c.suite, c.name) == *n));
    let pass = failed.is_empty() && present;
    report(10, pass, format!("{} checks, {} failed {failed:?}", checks.len(), failed.len()));
}
