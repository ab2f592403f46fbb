//! Parallel replication runner, aggregation and persisted reports.
//!
//! Output files in the scenario directory:
//!
//! * `summary.json`: per-`n` aggregates; byte-identical for a given config and
//!   seed, whatever the worker count.
//! * `reps.csv`: one row per replication and entry, columns
//!   `n,rep,ok,n_t,k_n,entry,estimate,truth,z,error` followed by one column per
//!   diagnostic (`tricity`, `lrv`, ...).
//! * `timing.json`: wall-clock statistics, kept apart from the summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use preavg_core::stats::{pairwise_sum, Moments};

use crate::config::ScenarioConfig;
use crate::scenario::{entry_labels, run_replication, RepRecord};

/// Environment variable with the default worker count.
pub const WORKERS_ENV: &str = "PREAVG_WORKERS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("cannot build worker pool: {0}")]
    Pool(String),
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error("cannot encode output: {0}")]
    Encode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZMoments {
    pub count: usize,
    pub mean: Option<f64>,
    pub var: Option<f64>,
    pub skew: Option<f64>,
    pub kurt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntrySummary {
    pub label: String,
    pub truth_mean: f64,
    pub bias: f64,
    pub rmse: f64,
    /// Sample variance of `n^{1/4} (estimate - truth)`.
    pub scaled_error_var: Option<f64>,
    pub z: Option<ZMoments>,
    /// Fraction of replications with `|z| <= 1.96`.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraSummary {
    pub mean: f64,
    pub sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub rep: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub replications: usize,
    pub succeeded: usize,
    pub failures: Vec<Failure>,
    pub mean_n_t: Option<f64>,
    pub mean_k_n: Option<f64>,
    pub entries: Vec<EntrySummary>,
    pub extras: BTreeMap<String, ExtraSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCSummary {
    pub name: String,
    pub seed: u64,
    pub estimator: String,
    pub weight: String,
    pub theta: f64,
    pub horizon: f64,
    pub results: Vec<NSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub workers: usize,
    pub total_seconds: f64,
    /// Wall-clock seconds per sample size.
    pub per_n: Vec<(usize, f64)>,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: MCSummary,
    /// `records[i][rep]` for sample size `cfg.n[i]`.
    pub records: Vec<Vec<Result<RepRecord, String>>>,
    pub timing: Timing,
}

/// Worker count: explicit value, then the config, then the environment, then
/// the number of available cores.
pub fn resolve_workers(explicit: Option<usize>, cfg: &ScenarioConfig) -> usize {
    explicit
        .or(cfg.workers)
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "replication panicked".into())
}

/// Runs every replication of `cfg` on `workers` threads.
pub fn run_scenario(cfg: &ScenarioConfig, workers: usize) -> Result<RunOutput, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let start = Instant::now();
    let mut records = Vec::with_capacity(cfg.n.len());
    let mut per_n = Vec::with_capacity(cfg.n.len());
    for (i, &n) in cfg.n.iter().enumerate() {
        let t = Instant::now();
        let recs: Vec<Result<RepRecord, String>> = pool.install(|| {
            (0..cfg.replications)
                .into_par_iter()
                .map(|rep| {
                    catch_unwind(AssertUnwindSafe(|| run_replication(cfg, i, rep)))
                        .unwrap_or_else(|p| Err(panic_message(p)))
                })
                .collect()
        });
        per_n.push((n, t.elapsed().as_secs_f64()));
        records.push(recs);
    }
    let summary = summarize(cfg, &records);
    Ok(RunOutput {
        summary,
        records,
        timing: Timing {
            workers,
            total_seconds: start.elapsed().as_secs_f64(),
            per_n,
        },
    })
}

/// Aggregates replication records; the result depends only on the records
/// and their order.
pub fn summarize(cfg: &ScenarioConfig, records: &[Vec<Result<RepRecord, String>>]) -> MCSummary {
    let labels = entry_labels(cfg);
    let z975 = Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.975);
    let results = cfg
        .n
        .iter()
        .zip(records)
        .map(|(&n, recs)| {
            let ok: Vec<&RepRecord> = recs.iter().filter_map(|r| r.as_ref().ok()).collect();
            let failures = recs
                .iter()
                .enumerate()
                .filter_map(|(rep, r)| {
                    r.as_ref().err().map(|m| Failure {
                        rep,
                        message: m.clone(),
                    })
                })
                .collect();
            let n4 = (n as f64).powf(0.25);
            let entries = labels
                .iter()
                .enumerate()
                .map(|(e, label)| {
                    let vals: Vec<_> = ok.iter().filter_map(|r| r.entries.get(e)).collect();
                    let err: Vec<f64> = vals.iter().map(|v| v.estimate - v.truth).collect();
                    let truths: Vec<f64> = vals.iter().map(|v| v.truth).collect();
                    let sq: Vec<f64> = err.iter().map(|x| x * x).collect();
                    let m = vals.len().max(1) as f64;
                    let scaled: Vec<f64> = err.iter().map(|x| n4 * x).collect();
                    let zs: Vec<f64> = vals.iter().filter_map(|v| v.z).collect();
                    let z = (!zs.is_empty()).then(|| {
                        let mo = Moments::of(&zs);
                        ZMoments {
                            count: mo.count,
                            mean: finite(mo.mean),
                            var: finite(mo.variance),
                            skew: finite(mo.skewness),
                            kurt: finite(mo.kurtosis),
                        }
                    });
                    let covered: Vec<f64> = zs.iter().map(|z| if z.abs() <= z975 { 1.0 } else { 0.0 }).collect();
                    EntrySummary {
                        label: label.clone(),
                        truth_mean: pairwise_sum(&truths) / m,
                        bias: pairwise_sum(&err) / m,
                        rmse: (pairwise_sum(&sq) / m).sqrt(),
                        scaled_error_var: (scaled.len() > 1).then(|| Moments::of(&scaled).variance),
                        z,
                        coverage: (!zs.is_empty()).then(|| pairwise_sum(&covered) / zs.len() as f64),
                    }
                })
                .collect();
            let mut keys: Vec<&str> = ok.iter().flat_map(|r| r.extras.keys().copied()).collect();
            keys.sort_unstable();
            keys.dedup();
            let extras = keys
                .into_iter()
                .map(|key| {
                    let xs: Vec<f64> = ok.iter().filter_map(|r| r.extras.get(key).copied()).collect();
                    let mo = Moments::of(&xs);
                    (
                        key.to_string(),
                        ExtraSummary {
                            mean: mo.mean,
                            sd: finite(mo.variance.sqrt()),
                        },
                    )
                })
                .collect();
            let n_ts: Vec<f64> = ok.iter().map(|r| r.n_t as f64).collect();
            let k_ns: Vec<f64> = ok.iter().map(|r| r.k_n as f64).collect();
            NSummary {
                n,
                replications: recs.len(),
                succeeded: ok.len(),
                failures,
                mean_n_t: (!ok.is_empty()).then(|| pairwise_sum(&n_ts) / ok.len() as f64),
                mean_k_n: (!ok.is_empty()).then(|| pairwise_sum(&k_ns) / ok.len() as f64),
                entries,
                extras,
            }
        })
        .collect();
    MCSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        estimator: cfg.estimator.kind.name().into(),
        weight: cfg.estimator.weight.name(),
        theta: cfg.estimator.theta,
        horizon: cfg.horizon,
        results,
    }
}

pub fn summary_json(summary: &MCSummary) -> Result<String, RunError> {
    serde_json::to_string_pretty(summary).map_err(|e| RunError::Encode(e.to_string()))
}

fn create(path: &Path) -> Result<BufWriter<File>, RunError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| RunError::Write {
            path: path.display().to_string(),
            source,
        })
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |source| RunError::Write {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `reps.csv` for a run.
pub fn write_reps_csv<W: Write>(out: W, cfg: &ScenarioConfig, run: &RunOutput) -> Result<(), RunError> {
    let labels = entry_labels(cfg);
    let mut extra_keys: Vec<&str> = run
        .records
        .iter()
        .flatten()
        .filter_map(|r| r.as_ref().ok())
        .flat_map(|r| r.extras.keys().copied())
        .collect();
    extra_keys.sort_unstable();
    extra_keys.dedup();
    let mut w = csv::Writer::from_writer(out);
    let enc = |e: csv::Error| RunError::Encode(e.to_string());
    let mut header: Vec<String> = [
        "n", "rep", "ok", "n_t", "k_n", "entry", "estimate", "truth", "z", "error",
    ]
    .map(String::from)
    .to_vec();
    header.extend(extra_keys.iter().map(|k| k.to_string()));
    w.write_record(&header).map_err(enc)?;
    for (&n, recs) in cfg.n.iter().zip(&run.records) {
        for (rep, rec) in recs.iter().enumerate() {
            match rec {
                Ok(r) => {
                    for (label, e) in labels.iter().zip(&r.entries) {
                        let mut row = vec![
                            n.to_string(),
                            rep.to_string(),
                            "1".into(),
                            r.n_t.to_string(),
                            r.k_n.to_string(),
                            label.clone(),
                            e.estimate.to_string(),
                            e.truth.to_string(),
                            e.z.map(|z| z.to_string()).unwrap_or_default(),
                            String::new(),
                        ];
                        row.extend(
                            extra_keys
                                .iter()
                                .map(|k| r.extras.get(k).map(|v| v.to_string()).unwrap_or_default()),
                        );
                        w.write_record(&row).map_err(enc)?;
                    }
                }
                Err(msg) => {
                    let mut row = vec![n.to_string(), rep.to_string(), "0".into()];
                    row.extend(std::iter::repeat_n(String::new(), 6));
                    row.push(msg.clone());
                    row.extend(extra_keys.iter().map(|_| String::new()));
                    w.write_record(&row).map_err(enc)?;
                }
            }
        }
    }
    w.flush().map_err(|e| RunError::Encode(e.to_string()))
}

/// Writes `summary.json`, `reps.csv`, `timing.json` and the plot data into `dir`.
pub fn persist(dir: &Path, cfg: &ScenarioConfig, run: &RunOutput) -> Result<Vec<PathBuf>, RunError> {
    std::fs::create_dir_all(dir).map_err(write_err(dir))?;
    let summary_path = dir.join("summary.json");
    let mut f = create(&summary_path)?;
    writeln!(f, "{}", summary_json(&run.summary)?).map_err(write_err(&summary_path))?;
    f.flush().map_err(write_err(&summary_path))?;

    let reps_path = dir.join("reps.csv");
    write_reps_csv(create(&reps_path)?, cfg, run)?;

    let timing_path = dir.join("timing.json");
    let timing = serde_json::to_string_pretty(&run.timing).map_err(|e| RunError::Encode(e.to_string()))?;
    let mut f = create(&timing_path)?;
    writeln!(f, "{timing}").map_err(write_err(&timing_path))?;
    f.flush().map_err(write_err(&timing_path))?;

    let mut written = vec![summary_path, reps_path, timing_path];
    written.extend(crate::plot::emit_plot_data(dir, cfg, run)?);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(reps: usize) -> ScenarioConfig {
        ScenarioConfig::parse(&format!(
            "replications = {reps}\nseed = 11\nn = [1000, 2000]\n[path]\nsigma = 1.0\n[noise]\nupsilon = 0.01\n\
             [scheme]\nkind = \"equidistant\"\n[estimator]\nkind = \"mrc-fast\"\ntheta = \"oracle\""
        ))
        .unwrap()
    }

    #[test]
    fn single_replication_summary_is_the_estimate() {
        let c = cfg(1);
        let run = run_scenario(&c, 1).unwrap();
        let rec = run.records[0][0].as_ref().unwrap();
        let e = &run.summary.results[0].entries[0];
        assert_eq!(e.bias, rec.entries[0].estimate - rec.entries[0].truth);
        assert_eq!(e.rmse, e.bias.abs());
        assert_eq!(e.scaled_error_var, None);
    }

    #[test]
    fn worker_count_does_not_change_summary() {
        let c = cfg(12);
        let a = summary_json(&run_scenario(&c, 1).unwrap().summary).unwrap();
        let b = summary_json(&run_scenario(&c, 4).unwrap().summary).unwrap();
        assert_eq!(a, b);
        let s: MCSummary = serde_json::from_str(&a).unwrap();
        for r in &s.results {
            for e in &r.entries {
                assert!(e.rmse >= e.bias.abs());
                assert!(e.coverage.is_some_and(|c| (0.0..=1.0).contains(&c)));
            }
        }
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let mut c = cfg(3);
        c.n = vec![1000, 3];
        let run = run_scenario(&c, 2).unwrap();
        assert_eq!(run.summary.results[0].succeeded, 3);
        assert_eq!(run.summary.results[1].succeeded, 0);
        assert_eq!(run.summary.results[1].failures.len(), 3);
    }
}
