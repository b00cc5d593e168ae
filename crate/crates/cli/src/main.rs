use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use persistlab::experiment::{self, SpecFile};
use persistlab::kernel::{Kernel, JITTER_CAP};
use persistlab::langevin::{self, LangevinConfig};
use persistlab::rv::RegVarFn;
use persistlab::sampler::{self, fit_exponent, FitMode, FitPoint};
use persistlab::verify::{self, Suite};
use persistlab::walk::{JumpKernel, LatticeWalk};
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "persistlab", version, about = "Persistence probabilities of Gaussian processes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Experiment spec file (TOML).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Overrides every seed in the experiment file or command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, env = "PERSISTLAB_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// I_ρ(t), a_ρ(t) and the Karamata / Riemann-sum statistics.
    Rv {
        /// ρ as JSON, e.g. '{"family":"power_law","alpha":0.5}'.
        #[arg(long)]
        rho: String,
        #[arg(long, default_value_t = 1e6)]
        t: f64,
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Correlation matrix of a kernel on a grid; writes gram.csv.
    Kernel {
        /// Kernel as JSON, e.g. '{"variant":"ou","params":{"theta":1.0}}'.
        #[arg(long)]
        kernel: String,
        /// Comma-separated grid.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
    },
    /// Return probabilities and Green function of a lattice walk.
    Walk {
        /// Dimension of the simple random walk (ignored with --q).
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Jump kernel as JSON: [[[dx, ...], weight], ...].
        #[arg(long)]
        q: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        u: Vec<f64>,
    },
    /// Persistence probability of a kernel on a grid, or every experiment
    /// in --spec.
    Persist {
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, default_value_t = 1.0)]
        t1: f64,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value = "seq-is")]
        method: MethodArg,
        #[arg(long, default_value_t = 0.0)]
        level: f64,
        /// Only run the named experiment from --spec.
        #[arg(long)]
        only: Option<String>,
    },
    /// Fits −log p against T, log T or a_ρ(T) from a report CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        /// Fit mode as JSON, e.g. '{"mode":"per_t"}'.
        #[arg(long, default_value = r#"{"mode":"per_t"}"#)]
        mode: String,
    },
    /// Runs the Langevin system from a TOML config.
    Langevin {
        #[arg(long)]
        config: PathBuf,
        /// Also write trajectories in the PHI1 binary format.
        #[arg(long)]
        trajectories: bool,
    },
    /// Runs a verification suite; exit code 1 if any check fails.
    Verify {
        #[arg(default_value = "all")]
        suite: String,
    },
    /// Envelope table for a ρ with α ∈ (0, 1].
    Envelopes {
        #[arg(long)]
        rho: String,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Crude,
    SeqIs,
}

fn write_json(dir: &Path, name: &str, v: &impl serde::Serialize) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let g = cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.cmd {
        Cmd::Rv { rho, t, mu } => {
            let f: RegVarFn = serde_json::from_str(&rho).context("parsing --rho")?;
            let a = f.alpha();
            let karamata = if a < 1.0 {
                Some(f.karamata_ratio(0.0, t)?)
            } else if a > 1.0 {
                Some(f.karamata_ratio(f64::INFINITY, t)?)
            } else {
                None
            };
            let riemann = mu.map(|m| f.riemann_limit(m, t)).transpose()?;
            let out = json!({
                "rho": f, "t": t, "primitive": f.primitive(t, persistlab::rv::DEFAULT_TOL)?,
                "decay_rate": f.decay_rate(t).ok(), "karamata_ratio": karamata, "riemann_limit": riemann,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Cmd::Kernel { kernel, grid } => {
            let k: Kernel = serde_json::from_str(&kernel).context("parsing --kernel")?;
            let gram = k.gram(&grid, JITTER_CAP)?;
            fs::create_dir_all(&g.out)?;
            gram.write_csv(&g.out.join("gram.csv"))?;
            let rows: Vec<Vec<f64>> = (0..gram.dim()).map(|i| gram.matrix.row(i).iter().copied().collect()).collect();
            println!("{}", serde_json::to_string_pretty(&json!({"kernel": k, "grid": grid, "jitter_used": gram.jitter_used, "matrix": rows}))?);
        }
        Cmd::Walk { d, q, u } => {
            let q = match q {
                Some(s) => serde_json::from_str::<JumpKernel>(&s).context("parsing --q")?,
                None => JumpKernel::srw(d),
            };
            let w = LatticeWalk::new(q)?;
            let rho: Vec<f64> = u.iter().map(|&x| w.rho(x)).collect();
            let green = w.green(0).ok();
            let first_return = w.table().first_return_probability()?;
            println!(
                "{}",
                serde_json::to_string_pretty(&json!({"q": w.kernel(), "u": u, "rho": rho, "green0": green, "first_return": first_return}))?
            );
        }
        Cmd::Persist { kernel, t0, t1, step, n, method, level, only } => {
            if let Some(path) = &g.spec {
                let file = SpecFile::load(path)?;
                for mut e in file.experiment {
                    if only.as_ref().is_some_and(|o| *o != e.name) {
                        continue;
                    }
                    if let Some(s) = g.seed {
                        e.estimator.seed = s;
                    }
                    let report = experiment::run(&e)?;
                    fs::create_dir_all(&g.out)?;
                    experiment::write_csv(fs::File::create(g.out.join(format!("{}.csv", e.name)))?, &report.rows)?;
                    write_json(&g.out, &format!("{}.json", e.name), &report)?;
                    experiment::write_csv(std::io::stdout().lock(), &report.rows)?;
                    for f in report.fits.iter().filter_map(|l| l.fit.as_ref()) {
                        eprintln!("{}: {} slope {:.4} [{:.4}, {:.4}]", e.name, f.mode, f.slope, f.ci_95[0], f.ci_95[1]);
                    }
                }
            } else {
                let Some(kernel) = kernel else { bail!("persist needs --kernel or --spec") };
                let k: Kernel = serde_json::from_str(&kernel).context("parsing --kernel")?;
                let m = ((t1 - t0) / step).round() as usize;
                let grid: Vec<f64> = (0..=m).map(|i| t0 + i as f64 * step).collect();
                let seed = g.seed.unwrap_or(0);
                let est = match method {
                    MethodArg::SeqIs => sampler::persist_ghk(&k, &grid, level, n, seed)?,
                    MethodArg::Crude => sampler::persist_mc(&k, &grid, level, n, seed)?,
                };
                println!("{}", serde_json::to_string_pretty(&est)?);
            }
        }
        Cmd::Fit { csv, mode } => {
            let mode: FitMode = serde_json::from_str(&mode).context("parsing --mode")?;
            let text = fs::read_to_string(&csv).with_context(|| format!("reading {}", csv.display()))?;
            let mut pts = Vec::new();
            for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
                let c: Vec<&str> = line.split(',').collect();
                if c.len() != experiment::CSV_HEADER.len() {
                    bail!("expected {} columns in `{line}`", experiment::CSV_HEADER.len());
                }
                let (t, p, log_p, se): (f64, f64, f64, f64) = (c[1].parse()?, c[2].parse()?, c[3].parse()?, c[4].parse()?);
                pts.push(FitPoint { t, log_p, stderr: if p > 0.0 { se / p } else { 0.0 } });
            }
            println!("{}", serde_json::to_string_pretty(&fit_exponent(&pts, &mode)?)?);
        }
        Cmd::Langevin { config, trajectories } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = LangevinConfig::from_toml(&text)?;
            if let Some(s) = g.seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let traj = langevin::run_trajectories(&cfg)?;
            let cov = langevin::cov_from_trajectories(&cfg, &traj);
            let persistence = match cfg.interval {
                Some((a, b)) => Some(langevin::persistence_from_trajectories(&cfg, &traj, a, b)?),
                None => None,
            };
            if trajectories {
                fs::create_dir_all(&g.out)?;
                langevin::write_trajectories(fs::File::create(g.out.join("trajectories.phi"))?, &cfg, &traj)?;
            }
            let out = json!({"cov": cov, "persistence": persistence});
            write_json(&g.out, "langevin.json", &out)?;
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Cmd::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let checks = verify::verify(suite);
            for c in &checks {
                println!("{c}");
            }
            write_json(&g.out, "verify.json", &checks)?;
            return Ok(verify::all_pass(&checks));
        }
        Cmd::Envelopes { rho, t } => {
            let f: RegVarFn = serde_json::from_str(&rho).context("parsing --rho")?;
            let rows = experiment::envelope_tables(&t, &f)?;
            println!("T,a_rho,lower,upper");
            for r in rows {
                println!("{},{},{},{}", r.t, r.a_rho, r.lower, r.upper);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
