//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`). Positional arguments select
//! criteria by number, e.g. `cargo test --test acceptance -- 4 9`; the exit
//! status is non-zero when any selected criterion fails.

use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use preavg_core::estimators::{avar_univariate, mrc_from_values, Construction};
use preavg_core::market_sim::{simulate_path, PathModel};
use preavg_core::param_jump::{fisher_entry, fisher_entry_solve};
use preavg_core::stats::mean;
use preavg_core::timegrid::{
    duration_stats, long_run_variation, poisson_g_limit, refresh_times, sample_equidistant, sample_hitting_barriers,
    sample_poisson, FinePath,
};
use preavg_core::weights::{constants_quadrature, phi_quadrature, window_size, Component, WeightSpec};
use preavg_mc::config::ScenarioConfig;
use preavg_mc::efficiency::{compare_efficiency, standard_configs};
use preavg_mc::summary::{persist, resolve_workers, run_scenario, EntrySummary, NSummary};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ScenarioConfig {
    let path = configs_dir().join(format!("{name}.toml"));
    ScenarioConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn workers(cfg: &ScenarioConfig) -> usize {
    resolve_workers(None, cfg)
}

fn run(name: &str) -> Vec<NSummary> {
    let cfg = load(name);
    let out = run_scenario(&cfg, workers(&cfg)).expect("scenario runs");
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance").join(name);
    persist(&dir, &cfg, &out).expect("outputs written");
    out.summary.results
}

fn all_succeeded(results: &[NSummary]) -> Result<(), String> {
    for r in results {
        if r.succeeded != r.replications {
            return Err(format!(
                "{} of {} replications failed at n = {}",
                r.failures.len(),
                r.replications,
                r.n
            ));
        }
    }
    Ok(())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn c1_weight_constants() -> Verdict {
    let start = Instant::now();
    let tent = WeightSpec::tent().constants;
    let dexp = WeightSpec::double_exponential(1.0).unwrap().constants;
    let mut ok = close(tent.psi1, 1.0, 1e-15) && close(tent.psi2, 1.0 / 12.0, 1e-15);
    let expected = [1.0, 1.0, 1.25, 0.25, 0.25];
    let got = [dexp.psi1, dexp.psi2, dexp.phi22, dexp.phi12, dexp.phi11];
    ok &= expected.iter().zip(&got).all(|(e, g)| close(*e, *g, 1e-15));
    let mut worst: f64 = 0.0;
    for spec in [WeightSpec::tent(), WeightSpec::double_exponential(1.0).unwrap()] {
        let q = constants_quadrature(&spec.kind).unwrap().value;
        let c = spec.constants;
        for (a, b) in [
            (q.psi1, c.psi1),
            (q.psi2, c.psi2),
            (q.phi22, c.phi22),
            (q.phi12, c.phi12),
            (q.phi11, c.phi11),
        ] {
            worst = worst.max((a - b).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= worst <= 1e-8 && secs < 1.0;
    Verdict::new(
        ok,
        format!("max |quadrature - closed form| = {worst:.1e}, runtime {secs:.3} s"),
    )
}

fn c2_kernel_correspondence() -> Verdict {
    let spec = WeightSpec::double_exponential(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let y = -3.0 + 0.7 * i as f64;
        let target = (1.0 + y.abs()) * (-y.abs()).exp();
        let closed = spec.phi(Component::G, Component::G, y).unwrap();
        let quad = phi_quadrature(&spec.kind, Component::G, Component::G, y).unwrap();
        worst = worst.max((closed - target).abs()).max((quad - target).abs());
    }
    Verdict::new(worst <= 1e-10, format!("max deviation over 10 points {worst:.1e}"))
}

fn c3_efficiency_bound() -> Verdict {
    let start = Instant::now();
    let spec = WeightSpec::double_exponential(1.0).unwrap();
    let mut worst: f64 = 0.0;
    for (s, u) in [(1.0, 0.01), (0.3, 0.002), (2.5, 0.7), (0.05, 4e-4)] {
        let v = avar_univariate(&spec, f64::sqrt(u) / s, s * s, u, 1.0);
        let b = 8.0 * f64::powi(s, 3) * f64::sqrt(u);
        worst = worst.max((v - b).abs() / b);
    }
    let cfgs = standard_configs(1.0, 0.01, 100_000, 500, 1).unwrap();
    let table = compare_efficiency(&cfgs[1..2], workers(&cfgs[1])).unwrap();
    let ratio = table.rows[0].ratio.unwrap_or(f64::NAN);
    let secs = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-10 && (0.75..=1.3).contains(&ratio) && secs < 600.0;
    Verdict::new(
        ok,
        format!("identity error {worst:.1e}; MC variance / 8 sigma^3 sqrt(Upsilon) = {ratio:.3}; {secs:.1} s"),
    )
}

fn moment_test(e: &EntrySummary) -> Result<String, String> {
    let z = e.z.ok_or_else(|| format!("{}: no z-scores", e.label))?;
    let (m, v, s, k) = (
        z.mean.unwrap_or(f64::NAN),
        z.var.unwrap_or(f64::NAN),
        z.skew.unwrap_or(f64::NAN),
        z.kurt.unwrap_or(f64::NAN),
    );
    let text = format!("{} mean {m:+.3} var {v:.3} skew {s:+.3} kurt {k:.2}", e.label);
    let ok = m.abs() <= 0.08 && (0.85..=1.15).contains(&v) && s.abs() <= 0.3 && (2.4..=3.6).contains(&k);
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn c4_clt() -> Verdict {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["clt-equidistant", "clt-poisson", "clt-hitting"] {
        let res = run(name);
        if let Err(e) = all_succeeded(&res) {
            ok = false;
            parts.push(format!("{name}: {e}"));
            continue;
        }
        for e in &res[0].entries {
            match moment_test(e) {
                Ok(t) => parts.push(format!("{name} {t}")),
                Err(t) => {
                    ok = false;
                    parts.push(format!("{name} {t} [out of bounds]"));
                }
            }
        }
    }
    Verdict::new(ok, parts.join("; "))
}

fn noisy_walk(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut x = 0.0;
    (0..=n)
        .map(|_| {
            x += rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt();
            x + 0.05 * rng.sample::<f64, _>(StandardNormal)
        })
        .collect()
}

fn min_time<F: FnMut()>(mut f: F, repeats: usize) -> f64 {
    (0..repeats)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .fold(f64::INFINITY, f64::min)
}

fn c5_fast_path() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(200..3000);
        let rate = rng.gen_range(0.3..3.0);
        let spec = WeightSpec::double_exponential(rate).unwrap();
        let k = window_size(rng.gen_range(0.05..1.0), n).unwrap().min((n - 1) / 2);
        let values = vec![noisy_walk(&mut rng, n)];
        let fast = mrc_from_values(&values, &spec, k, Construction::Jittered, true)
            .unwrap()
            .estimate()[(0, 0)];
        let direct = mrc_from_values(&values, &spec, k, Construction::Jittered, false)
            .unwrap()
            .estimate()[(0, 0)];
        worst = worst.max((fast - direct).abs() / direct.abs().max(f64::MIN_POSITIVE));
    }
    let spec = WeightSpec::double_exponential(1.0).unwrap();
    let mut ratios = Vec::new();
    for n in [10_000usize, 100_000] {
        let small = vec![noisy_walk(&mut rng, n)];
        let large = vec![noisy_walk(&mut rng, 2 * n)];
        let (k1, k2) = (window_size(0.5, n).unwrap(), window_size(0.5, 2 * n).unwrap());
        let repeats = if n <= 10_000 { 60 } else { 15 };
        let t1 = min_time(
            || drop(mrc_from_values(&small, &spec, k1, Construction::Jittered, true)),
            repeats,
        );
        let t2 = min_time(
            || drop(mrc_from_values(&large, &spec, k2, Construction::Jittered, true)),
            repeats,
        );
        ratios.push(t2 / (2.0 * t1));
    }
    let avg = mean(&ratios);
    Verdict::new(
        worst <= 1e-9 && avg <= 1.3,
        format!(
            "max relative gap {worst:.1e} over 100 datasets; time(2N) / (2 time(N)) = {:.3}, {:.3} (avg {avg:.3})",
            ratios[0], ratios[1]
        ),
    )
}

fn c6_refresh_limits() -> Verdict {
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [vec![1.0], vec![1.0, 1.0], vec![1.0, 0.5, 2.0]] {
        let g = poisson_g_limit(&p).unwrap();
        let means: Vec<f64> = (0..20)
            .map(|_| {
                let s = sample_poisson(&p, n, 1.0, &mut rng).unwrap();
                duration_stats(&refresh_times(&s, 1.0).unwrap(), n, 1.0).mean_scaled_duration
            })
            .collect();
        let emp = mean(&means);
        let rel = (emp / g - 1.0).abs();
        ok &= rel <= 0.02;
        parts.push(format!("d={} G {g:.4} empirical {emp:.4}", p.len()));
    }
    let (alpha, beta, sigma) = (1.0, 2.0, 1.0);
    let model = PathModel::constant(sigma).unwrap();
    let means: Vec<f64> = (0..10)
        .map(|_| {
            let path = simulate_path(&model, 100 * n, 1.0, &mut rng).unwrap();
            let var = path.spot_variance(0);
            let fine = FinePath {
                step: path.step,
                values: &path.x[0],
                spot_variance: Some(&var),
            };
            let hits = sample_hitting_barriers(alpha, beta, n, fine, 1.0, Some(&mut rng)).unwrap();
            duration_stats(hits.schedule.times(), n, 1.0).mean_scaled_duration
        })
        .collect();
    let g = alpha * beta / (sigma * sigma);
    let emp = mean(&means);
    ok &= (emp / g - 1.0).abs() <= 0.02;
    parts.push(format!("hitting G {g:.4} empirical {emp:.4}"));
    Verdict::new(ok, parts.join("; "))
}

fn c7_long_run_variation() -> Verdict {
    let (n, m) = (10_000, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut parts = Vec::new();
    let mut ok = true;
    let eq = sample_equidistant(n, 1.0).unwrap();
    let lrv = long_run_variation(eq.times(), n, m, 1.0).unwrap();
    ok &= (lrv - 1.0).abs() <= 0.05;
    parts.push(format!("equidistant {lrv:.4} vs 1"));

    let p = [1.0, 1.0];
    let g = poisson_g_limit(&p).unwrap();
    let vals: Vec<f64> = (0..20)
        .map(|_| {
            let s = sample_poisson(&p, n, 1.0, &mut rng).unwrap();
            long_run_variation(&refresh_times(&s, 1.0).unwrap(), n, m, 1.0).unwrap()
        })
        .collect();
    let lrv = mean(&vals);
    ok &= (lrv / g - 1.0).abs() <= 0.05;
    parts.push(format!("poisson {lrv:.4} vs {g:.4}"));

    let model = PathModel::constant(1.0).unwrap();
    let vals: Vec<f64> = (0..10)
        .map(|_| {
            let path = simulate_path(&model, 100 * n, 1.0, &mut rng).unwrap();
            let var = path.spot_variance(0);
            let fine = FinePath {
                step: path.step,
                values: &path.x[0],
                spot_variance: Some(&var),
            };
            let hits = sample_hitting_barriers(1.0, 1.0, n, fine, 1.0, Some(&mut rng)).unwrap();
            long_run_variation(hits.schedule.times(), n, m, 1.0).unwrap()
        })
        .collect();
    let lrv = mean(&vals);
    ok &= (lrv - 1.0).abs() <= 0.05;
    parts.push(format!("hitting {lrv:.4} vs 1"));
    Verdict::new(ok, parts.join("; "))
}

fn c8_tricity() -> Verdict {
    let res = run("tricity-hitting");
    if let Err(e) = all_succeeded(&res) {
        return Verdict::new(false, e);
    }
    let at = |n: usize| {
        res.iter()
            .find(|r| r.n == n)
            .and_then(|r| r.extras.get("tricity"))
            .map(|t| t.mean)
            .unwrap_or(f64::NAN)
    };
    let (small, large) = (at(1000), at(40_000));
    Verdict::new(
        large.abs() < small.abs(),
        format!(
            "|mean tricity| {:.4} at n=1e3, {:.4} at n=4e4",
            small.abs(),
            large.abs()
        ),
    )
}

fn c9_jumps() -> Verdict {
    let cfg = load("jumps-threshold");
    let res = run("jumps-threshold");
    if let Err(e) = all_succeeded(&res) {
        return Verdict::new(false, e);
    }
    let jv = res[0].entries.iter().find(|e| e.label == "jv").expect("jv entry");
    let coverage = jv.coverage.unwrap_or(f64::NAN);
    let (sigma, upsilon) = (cfg.constant_sigma().unwrap(), cfg.constant_upsilon().unwrap());
    let gamma2 = jv.truth_mean;
    let target = 4.0 * 5f64.sqrt() * sigma * upsilon.sqrt() * gamma2;
    let ratio = jv.scaled_error_var.unwrap_or(f64::NAN) / target;
    Verdict::new(
        (0.90..=0.99).contains(&coverage) && (0.75..=1.3).contains(&ratio),
        format!("JV coverage {coverage:.3}; MC variance / (4 sqrt5 sigma sqrt(Upsilon) gamma^2) = {ratio:.3}"),
    )
}

fn c10_parametric() -> Verdict {
    let cfg = load("param-jump");
    let res = run("param-jump");
    if let Err(e) = all_succeeded(&res) {
        return Verdict::new(false, e);
    }
    let (sigma, upsilon) = (cfg.constant_sigma().unwrap(), cfg.constant_upsilon().unwrap());
    let bound = 2.0 * sigma * upsilon.sqrt();
    let ratio = res[0].entries[0].scaled_error_var.unwrap_or(f64::NAN) / bound;
    let mut ok = (ratio - 1.0).abs() <= 0.15;

    let mut worst: f64 = 0.0;
    for (a, b) in [(0.5, 0.5), (0.3, 0.7), (0.1, 0.9), (0.25, 0.2501), (0.8, 0.8)] {
        let e = fisher_entry(4000, sigma, upsilon, a, b).unwrap();
        let s = fisher_entry_solve(4000, sigma, upsilon, a, b).unwrap();
        worst = worst.max((e - s).abs());
    }
    ok &= worst <= 1e-8;
    let limit = 1.0 / bound;
    let diag: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&n| (fisher_entry(n, sigma, upsilon, 0.5, 0.5).unwrap() - limit).abs())
        .collect();
    let off: Vec<f64> = [1_000, 10_000, 100_000]
        .iter()
        .map(|&n| fisher_entry(n, sigma, upsilon, 0.3, 0.7).unwrap().abs())
        .collect();
    let converging = diag.windows(2).all(|w| w[1] <= w[0]) && off.windows(2).all(|w| w[1] <= w[0]);
    ok &= converging && diag[2] <= 0.01 * limit && off[2] <= 0.01 * limit;
    Verdict::new(
        ok,
        format!(
            "MC variance / 2 sigma sqrt(Upsilon) = {ratio:.3}; closed form vs solve {worst:.1e}; \
             |I_kk - limit| {:.1e} -> {:.1e}, |I_kl| {:.1e} -> {:.1e}",
            diag[0], diag[2], off[0], off[2]
        ),
    )
}

fn c11_orderings() -> Verdict {
    let (mle, vj, spectral) = (8.0, 4.0 * 5f64.sqrt(), 9.0);
    let mut ok = mle < vj && vj < spectral;
    let mut parts = vec![format!("8 < {vj:.4} < 9")];
    for name in ["tent", "doubleexp", "doubleexp:sqrt5", "pwl:0/0,0.25/1,0.75/1,1/0"] {
        let spec = WeightSpec::parse(name).unwrap();
        let gap = spec.jump_variance_gap();
        ok &= gap > 0.0;
        parts.push(format!("{name} gap {gap:.3e}"));
    }
    Verdict::new(ok, parts.join("; "))
}

fn c12_determinism() -> Verdict {
    let cfg = load("determinism");
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join("determinism");
    let mut files = Vec::new();
    for (i, w) in [1usize, 4, 1, 3].into_iter().enumerate() {
        let out = run_scenario(&cfg, w).unwrap();
        let dir = base.join(format!("run{i}-w{w}"));
        persist(&dir, &cfg, &out).unwrap();
        files.push(std::fs::read(dir.join("summary.json")).unwrap());
    }
    let identical = files.windows(2).all(|w| w[0] == w[1]);
    Verdict::new(
        identical,
        format!("4 runs (workers 1, 4, 1, 3): summary.json byte-identical = {identical}"),
    )
}

type Check = fn() -> Verdict;

fn main() {
    let checks: [(u32, &str, Check); 12] = [
        (1, "weight constants", c1_weight_constants),
        (2, "kernel correspondence", c2_kernel_correspondence),
        (3, "efficiency bound", c3_efficiency_bound),
        (4, "central limit theorem", c4_clt),
        (5, "fast exponential path", c5_fast_path),
        (6, "refresh-time limits", c6_refresh_limits),
        (7, "long-run variation of time", c7_long_run_variation),
        (8, "tricity", c8_tricity),
        (9, "jump variation", c9_jumps),
        (10, "parametric MLE", c10_parametric),
        (11, "efficiency ordering", c11_orderings),
        (12, "determinism", c12_determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    // `cargo test` runs the default suite quietly; keep the panic hook's output
    // short so a failing criterion reads as one line plus its message.
    std::panic::set_hook(Box::new(|info| eprintln!("panic: {info}")));
    let mut failed = 0;
    for (id, name, check) in checks {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(check).unwrap_or_else(|_| Verdict::new(false, "panicked"));
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        if !verdict.pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {status} {name} ({:.1} s): {}",
            start.elapsed().as_secs_f64(),
            verdict.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
