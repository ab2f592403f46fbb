//! `preavg` command-line interface.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use preavg_core::estimators::{mrc, mrc_fast_exponential, threshold_estimators, Construction};
use preavg_core::io::{read_ticks, write_sync_grid, write_ticks};
use preavg_core::param_jump::{fisher_entry, fisher_entry_solve, ParametricModel};
use preavg_core::stats::{correlation, Moments};
use preavg_core::timegrid::synchronize;
use preavg_core::weights::{constants_quadrature, WeightSpec};
use preavg_mc::config::ScenarioConfig;
use preavg_mc::efficiency::{compare_efficiency, standard_configs};
use preavg_mc::plot::rmse_slopes;
use preavg_mc::scenario::simulate_ticks;
use preavg_mc::summary::{persist, resolve_workers, run_scenario, MCSummary};

type CliResult = Result<(), Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(
    name = "preavg",
    version,
    about = "Pre-averaging estimators for noisy asynchronous tick data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one replication of a scenario and write its tick data.
    Simulate {
        config: PathBuf,
        /// Index into the config's `n` list.
        #[arg(long, default_value_t = 0)]
        n_index: usize,
        #[arg(long, default_value_t = 0)]
        rep: usize,
        /// Tick CSV output (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the synchronized grid here.
        #[arg(long)]
        sync: Option<PathBuf>,
    },
    /// Estimate integrated covariance from a tick CSV.
    Estimate {
        ticks: PathBuf,
        #[arg(long, default_value = "tent")]
        weight: String,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value = "jittered")]
        construction: String,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
        /// Use the linear-time recursion (double-exponential weights only).
        #[arg(long)]
        fast: bool,
    },
    /// Split quadratic variation into diffusive and jump parts.
    Decompose {
        ticks: PathBuf,
        #[arg(long, default_value = "doubleexp")]
        weight: String,
        /// Weight of the jump part (defaults to `--weight`).
        #[arg(long)]
        jump_weight: Option<String>,
        #[arg(long)]
        theta: f64,
        /// Threshold constant: `rho = c n^{-w}`.
        #[arg(long)]
        c: f64,
        #[arg(long, default_value_t = 0.2)]
        w: f64,
        #[arg(long, default_value_t = 1.0)]
        horizon: f64,
    },
    /// Maximum-likelihood jump sizes in the parametric model.
    ParamJump {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        upsilon: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        jump_times: Vec<f64>,
        /// Jump sizes used for simulation when no `--input` is given.
        #[arg(long, value_delimiter = ',')]
        jump_sizes: Vec<f64>,
        /// One observation per line (`Z_1..Z_n`); simulated when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte Carlo replications of the simulated model (needs `--jump-sizes`).
        #[arg(long, default_value_t = 0)]
        reps: usize,
    },
    /// Run a Monte Carlo scenario and write summary.json, reps.csv, timing.json, qq.csv and rmse.csv.
    Montecarlo {
        config: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Print a summary.json as a table.
    Report { summary: PathBuf },
    /// Print weight constants with quadrature cross-checks.
    Weights {
        #[arg(default_values_t = ["tent".to_string(), "doubleexp".to_string(), "doubleexp:sqrt5".to_string()])]
        names: Vec<String>,
    },
    /// Compare tent MRC, double-exponential MRC and the realized kernel against the parametric bound.
    Efficiency {
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.01)]
        upsilon: f64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn open_ticks(path: &PathBuf) -> Result<Vec<preavg_core::timegrid::TickSchedule>, Box<dyn std::error::Error>> {
    Ok(read_ticks(BufReader::new(File::open(path)?))?)
}

fn print_json<T: serde::Serialize>(value: &T) -> CliResult {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Simulate {
            config,
            n_index,
            rep,
            out,
            sync,
        } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let ticks = simulate_ticks(&cfg, n_index, rep)?;
            match out {
                Some(p) => write_ticks(BufWriter::new(File::create(p)?), &ticks)?,
                None => write_ticks(std::io::stdout().lock(), &ticks)?,
            }
            if let Some(p) = sync {
                let grid = synchronize(&ticks, cfg.horizon)?;
                write_sync_grid(BufWriter::new(File::create(p)?), &grid)?;
            }
        }
        Command::Estimate {
            ticks,
            weight,
            theta,
            construction,
            horizon,
            fast,
        } => {
            let ticks = open_ticks(&ticks)?;
            let spec = WeightSpec::parse(&weight)?;
            let report = if fast {
                let rate = spec.kind.decay_rate().ok_or("--fast needs a doubleexp weight")?;
                mrc_fast_exponential(&ticks, rate, theta, horizon)?
            } else {
                let construction = match construction.as_str() {
                    "jittered" => Construction::Jittered,
                    "bounded" => Construction::Bounded,
                    other => return Err(format!("unknown construction '{other}'").into()),
                };
                mrc(&ticks, &spec, theta, horizon, construction)?
            };
            print_json(&report)?;
        }
        Command::Decompose {
            ticks,
            weight,
            jump_weight,
            theta,
            c,
            w,
            horizon,
        } => {
            let ticks = open_ticks(&ticks)?;
            let [schedule] = ticks.as_slice() else {
                return Err("decompose needs exactly one asset".into());
            };
            let iv = WeightSpec::parse(&weight)?;
            let jv = match jump_weight {
                Some(name) => WeightSpec::parse(&name)?,
                None => iv.clone(),
            };
            print_json(&threshold_estimators(schedule, &iv, &jv, c, w, theta, horizon)?)?;
        }
        Command::ParamJump {
            n,
            sigma,
            upsilon,
            jump_times,
            jump_sizes,
            input,
            seed,
            reps,
        } => {
            let input_given = input.is_some();
            let (z, sizes) = match input {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    let z = text
                        .split_whitespace()
                        .map(str::parse::<f64>)
                        .collect::<Result<Vec<_>, _>>()?;
                    if z.len() != n {
                        return Err(format!("expected {n} observations, read {}", z.len()).into());
                    }
                    (Some(z), vec![0.0; jump_times.len()])
                }
                None => {
                    if jump_sizes.len() != jump_times.len() {
                        return Err("simulation needs one --jump-sizes entry per jump time".into());
                    }
                    (None, jump_sizes)
                }
            };
            let model = ParametricModel::new(n, sigma, upsilon, jump_times.clone(), sizes)?;
            let z = z.unwrap_or_else(|| model.simulate(&mut ChaCha8Rng::seed_from_u64(seed)));
            let gamma = model.estimate(&z)?;
            let mut report = serde_json::json!({
                "jump_times": jump_times,
                "estimates": gamma,
                "avar": model.asymptotic_variance(),
                "stderr": (model.asymptotic_variance() / (n as f64).sqrt()).sqrt(),
                "fisher": fisher_check(&model)?,
            });
            if reps > 0 {
                if input_given {
                    return Err("--reps simulates the model and cannot be combined with --input".into());
                }
                report["montecarlo"] = param_jump_montecarlo(&model, reps, seed)?;
            }
            print_json(&report)?;
        }
        Command::Montecarlo {
            config,
            workers,
            out_dir,
        } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let workers = resolve_workers(workers, &cfg);
            let run = run_scenario(&cfg, workers)?;
            let dir = out_dir
                .or_else(|| cfg.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            for p in persist(&dir, &cfg, &run)? {
                eprintln!("wrote {}", p.display());
            }
            let failed: usize = run.summary.results.iter().map(|r| r.failures.len()).sum();
            if failed > 0 {
                eprintln!("{failed} replication(s) failed; see summary.json");
            }
        }
        Command::Report { summary } => {
            let s: MCSummary = serde_json::from_reader(BufReader::new(File::open(summary)?))?;
            let mut out = std::io::stdout().lock();
            writeln!(
                out,
                "{} ({}, weight {}, theta {:.4}, seed {})",
                s.name, s.estimator, s.weight, s.theta, s.seed
            )?;
            writeln!(
                out,
                "{:>8} {:>10} {:>5} {:>11} {:>11} {:>11} {:>8} {:>8} {:>8} {:>8} {:>8}",
                "n", "entry", "ok", "bias", "rmse", "var(n^.25e)", "z mean", "z var", "z skew", "z kurt", "cover"
            )?;
            for r in &s.results {
                for e in &r.entries {
                    let z = e.z.unwrap_or(preavg_mc::summary::ZMoments {
                        count: 0,
                        mean: None,
                        var: None,
                        skew: None,
                        kurt: None,
                    });
                    writeln!(
                        out,
                        "{:>8} {:>10} {:>5} {:>11.3e} {:>11.3e} {:>11} {:>8} {:>8} {:>8} {:>8} {:>8}",
                        r.n,
                        e.label,
                        r.succeeded,
                        e.bias,
                        e.rmse,
                        fmt_opt(e.scaled_error_var),
                        fmt_opt(z.mean),
                        fmt_opt(z.var),
                        fmt_opt(z.skew),
                        fmt_opt(z.kurt),
                        fmt_opt(e.coverage)
                    )?;
                }
                for (k, v) in &r.extras {
                    writeln!(out, "{:>8} {:>10} mean {:.4e} sd {}", r.n, k, v.mean, fmt_opt(v.sd))?;
                }
            }
            for (label, slope) in rmse_slopes(&s) {
                if let Some(slope) = slope {
                    writeln!(out, "log-log RMSE slope for {label}: {slope:.3}")?;
                }
            }
        }
        Command::Weights { names } => {
            let mut out = std::io::stdout().lock();
            writeln!(
                out,
                "{:<18} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10}",
                "weight", "psi1", "psi2", "Phi22", "Phi12", "Phi11", "max |q-c|"
            )?;
            for name in names {
                let spec = WeightSpec::parse(&name)?;
                let c = spec.constants;
                let q = constants_quadrature(&spec.kind)?.value;
                let gap = [
                    q.psi1 - c.psi1,
                    q.psi2 - c.psi2,
                    q.phi22 - c.phi22,
                    q.phi12 - c.phi12,
                    q.phi11 - c.phi11,
                ]
                .iter()
                .fold(0.0f64, |m, x| m.max(x.abs()));
                writeln!(
                    out,
                    "{:<18} {:>12.8} {:>12.8} {:>12.8} {:>12.8} {:>12.8} {:>10.1e}",
                    spec.name(),
                    c.psi1,
                    c.psi2,
                    c.phi22,
                    c.phi12,
                    c.phi11,
                    gap
                )?;
            }
        }
        Command::Efficiency {
            sigma,
            upsilon,
            n,
            reps,
            seed,
            workers,
        } => {
            let configs = standard_configs(sigma, upsilon, n, reps, seed)?;
            let workers = resolve_workers(workers, &configs[0]);
            let table = compare_efficiency(&configs, workers)?;
            let mut out = std::io::stdout().lock();
            writeln!(out, "bound 8 sigma^3 sqrt(Upsilon) = {:.6}", table.rows[0].bound)?;
            writeln!(
                out,
                "{:<14} {:<22} {:>8} {:>12} {:>10} {:>12}",
                "name", "weight", "theta", "MC var", "ratio", "theory ratio"
            )?;
            for r in table.ranking() {
                writeln!(
                    out,
                    "{:<14} {:<22} {:>8.4} {:>12} {:>10} {:>12}{}",
                    r.name,
                    r.weight,
                    r.theta,
                    fmt_opt(r.mc_var),
                    fmt_opt(r.ratio),
                    fmt_opt(r.theory_ratio),
                    if r.degenerate {
                        "  (Upsilon = 0: ratios undefined)"
                    } else {
                        ""
                    }
                )?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Information matrix `n^{-1/2} e_i^T V^{-1} e_j` at the jump indices by the
/// closed-form eigenpairs and by a tridiagonal solve, with its limit.
fn fisher_check(model: &ParametricModel) -> Result<serde_json::Value, Box<dyn std::error::Error>> {
    let (n, s, u) = (model.n, model.sigma, model.upsilon);
    let times = &model.jump_times;
    let mut closed = Vec::with_capacity(times.len());
    let mut max_gap: f64 = 0.0;
    for &a in times {
        let mut row = Vec::with_capacity(times.len());
        for &b in times {
            let e = fisher_entry(n, s, u, a, b)?;
            max_gap = max_gap.max((e - fisher_entry_solve(n, s, u, a, b)?).abs());
            row.push(e);
        }
        closed.push(row);
    }
    Ok(serde_json::json!({
        "matrix": closed,
        "max_solve_gap": max_gap,
        "diagonal_limit": 1.0 / model.asymptotic_variance(),
    }))
}

/// Moments of `n^{1/4}(gamma_hat - gamma)` over `reps` simulated samples.
fn param_jump_montecarlo(
    model: &ParametricModel,
    reps: usize,
    seed: u64,
) -> Result<serde_json::Value, Box<dyn std::error::Error>> {
    let k = model.jump_times.len();
    let scale = (model.n as f64).powf(0.25);
    let mut errors = vec![Vec::with_capacity(reps); k];
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64);
        let g = model.estimate(&model.simulate(&mut rng))?;
        for (j, e) in errors.iter_mut().enumerate() {
            e.push(scale * (g[j] - model.jump_sizes[j]));
        }
    }
    let moments: Vec<Moments> = errors.iter().map(|e| Moments::of(e)).collect();
    let correlations: Vec<Vec<f64>> = errors
        .iter()
        .map(|a| errors.iter().map(|b| correlation(a, b)).collect())
        .collect();
    Ok(serde_json::json!({
        "replications": reps,
        "scaled_error": moments,
        "variance_ratio": moments.iter().map(|m| m.variance / model.asymptotic_variance()).collect::<Vec<_>>(),
        "correlation": correlations,
    }))
}
