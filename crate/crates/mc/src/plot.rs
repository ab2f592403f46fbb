//! Plot-ready CSV data; nothing is rendered.
//!
//! * `qq.csv`: columns `n,entry,rank,theoretical,empirical`. Sorted studentized errors
//!   against standard normal quantiles at `(rank - 0.5) / count`.
//! * `rmse.csv`: columns `entry,n,log_n,rmse,log_rmse,slope`. RMSE per sample size
//!   with the least-squares slope of `log rmse` on `log n` for the entry
//!   (empty when fewer than two sample sizes are available).

use std::fs::File;
use std::path::{Path, PathBuf};

use statrs::distribution::{ContinuousCDF, Normal};

use preavg_core::stats::ols_slope;

use crate::config::ScenarioConfig;
use crate::scenario::entry_labels;
use crate::summary::{MCSummary, RunError, RunOutput};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QqPoint {
    pub rank: usize,
    pub theoretical: f64,
    pub empirical: f64,
}

/// Normal QQ points of `z`, sorted.
pub fn qq_points(z: &[f64]) -> Vec<QqPoint> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut sorted = z.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, empirical)| QqPoint {
            rank: i + 1,
            theoretical: normal.inverse_cdf((i as f64 + 0.5) / m),
            empirical,
        })
        .collect()
}

/// Slope of `log rmse` on `log n` for every entry with at least two sizes.
pub fn rmse_slopes(summary: &MCSummary) -> Vec<(String, Option<f64>)> {
    let Some(first) = summary.results.first() else {
        return Vec::new();
    };
    first
        .entries
        .iter()
        .enumerate()
        .map(|(e, entry)| {
            let (x, y): (Vec<f64>, Vec<f64>) = summary
                .results
                .iter()
                .filter_map(|r| {
                    r.entries
                        .get(e)
                        .filter(|s| s.rmse > 0.0)
                        .map(|s| ((r.n as f64).ln(), s.rmse.ln()))
                })
                .unzip();
            let slope = (x.len() >= 2).then(|| ols_slope(&x, &y)).filter(|s| s.is_finite());
            (entry.label.clone(), slope)
        })
        .collect()
}

/// Writes `qq.csv` and `rmse.csv` into `dir`.
pub fn emit_plot_data(dir: &Path, cfg: &ScenarioConfig, run: &RunOutput) -> Result<Vec<PathBuf>, RunError> {
    let enc = |e: csv::Error| RunError::Encode(e.to_string());
    let open = |p: &Path| {
        File::create(p).map_err(|source| RunError::Write {
            path: p.display().to_string(),
            source,
        })
    };

    let qq_path = dir.join("qq.csv");
    let mut w = csv::Writer::from_writer(open(&qq_path)?);
    w.write_record(["n", "entry", "rank", "theoretical", "empirical"])
        .map_err(enc)?;
    let labels = entry_labels(cfg);
    for (&n, recs) in cfg.n.iter().zip(&run.records) {
        for (e, label) in labels.iter().enumerate() {
            let z: Vec<f64> = recs
                .iter()
                .filter_map(|r| r.as_ref().ok())
                .filter_map(|r| r.entries.get(e).and_then(|v| v.z))
                .collect();
            for p in qq_points(&z) {
                w.write_record([
                    n.to_string(),
                    label.clone(),
                    p.rank.to_string(),
                    p.theoretical.to_string(),
                    p.empirical.to_string(),
                ])
                .map_err(enc)?;
            }
        }
    }
    w.flush().map_err(|e| RunError::Encode(e.to_string()))?;

    let rmse_path = dir.join("rmse.csv");
    let mut w = csv::Writer::from_writer(open(&rmse_path)?);
    w.write_record(["entry", "n", "log_n", "rmse", "log_rmse", "slope"])
        .map_err(enc)?;
    let slopes = rmse_slopes(&run.summary);
    for (e, (label, slope)) in slopes.iter().enumerate() {
        for r in &run.summary.results {
            let Some(s) = r.entries.get(e) else { continue };
            w.write_record([
                label.clone(),
                r.n.to_string(),
                (r.n as f64).ln().to_string(),
                s.rmse.to_string(),
                s.rmse.ln().to_string(),
                slope.map(|v| v.to_string()).unwrap_or_default(),
            ])
            .map_err(enc)?;
        }
    }
    w.flush().map_err(|e| RunError::Encode(e.to_string()))?;
    Ok(vec![qq_path, rmse_path])
}
