//! Modulated realized covariance and its report type.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::preaverage::{preaverage_bounded, preaverage_jittered, Construction, PreAveraged};
use crate::error::{Error, Result};
use crate::timegrid::{long_run_variation, synchronize, SyncGrid, TickSchedule};
use crate::weights::{window_size, WeightKind, WeightSpec};

/// Row-major copy of a matrix for serialization.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::input("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// `[Y,Y] = sum_p dY_p dY_p^T` over synchronized returns.
pub fn realized_covariance(values: &[Vec<f64>]) -> DMatrix<f64> {
    let d = values.len();
    let returns: Vec<Vec<f64>> = values
        .iter()
        .map(|v| v.windows(2).map(|w| w[1] - w[0]).collect())
        .collect();
    DMatrix::from_fn(d, d, |a, b| {
        returns[a].iter().zip(&returns[b]).map(|(x, y)| x * y).sum()
    })
}

/// `(1 / (psi2 k)) sum_i Y_i Y_i^T` over the pre-averaged blocks.
pub fn block_sum(pre: &PreAveraged, spec: &WeightSpec, k: usize) -> DMatrix<f64> {
    let d = pre.blocks.len();
    let scale = 1.0 / (spec.constants.psi2 * k as f64);
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let s: f64 = pre.blocks[a].iter().zip(&pre.blocks[b]).map(|(x, y)| x * y).sum();
            m[(a, b)] = s * scale;
            m[(b, a)] = s * scale;
        }
    }
    m
}

/// The two terms of the estimator: `estimate = block_term - bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct MrcParts {
    pub block_term: DMatrix<f64>,
    pub bias: DMatrix<f64>,
    pub k: usize,
    pub blocks: PreAveraged,
}

impl MrcParts {
    pub fn estimate(&self) -> DMatrix<f64> {
        &self.block_term - &self.bias
    }
}

/// Estimator from synchronized values with a given window size `k`.
/// `fast` selects the linear-time recursion for exponential weights.
pub fn mrc_from_values(
    values: &[Vec<f64>],
    spec: &WeightSpec,
    k: usize,
    construction: Construction,
    fast: bool,
) -> Result<MrcParts> {
    let blocks = match construction {
        Construction::Bounded => preaverage_bounded(values, spec, k)?,
        Construction::Jittered => preaverage_jittered(values, spec, k, fast)?,
    };
    let block_term = block_sum(&blocks, spec, k);
    let c = spec.constants;
    let bias = realized_covariance(values) * (c.psi1 / (2.0 * c.psi2 * (k * k) as f64));
    Ok(MrcParts {
        block_term,
        bias,
        k,
        blocks,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Long-run variation of time with `m = k`, evaluated at the horizon.
    pub long_run_variation: Option<f64>,
    /// Tricity of latent blocks, available in simulations only.
    pub tricity: Option<f64>,
    /// The synchronized grid was cut because an asset ran out of ticks.
    pub grid_truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: Vec<Vec<f64>>,
    pub bias_correction: Vec<Vec<f64>>,
    pub n_t: usize,
    pub k_n: usize,
    pub theta: f64,
    pub weight: String,
    pub construction: Construction,
    /// Oracle standard error `sqrt(avar^{kl,kl} / sqrt(n))` per entry.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<Vec<Vec<Option<f64>>>>,
    /// Studentized errors against a supplied truth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_scores: Option<Vec<Vec<Option<f64>>>>,
    pub diagnostics: Diagnostics,
}

impl EstimateReport {
    pub fn estimate_matrix(&self) -> DMatrix<f64> {
        matrix_from_rows(&self.estimate).expect("report matrices are rectangular")
    }

    pub fn bias_matrix(&self) -> DMatrix<f64> {
        matrix_from_rows(&self.bias_correction).expect("report matrices are rectangular")
    }

    /// Attaches oracle standard errors and z-scores.
    pub fn attach_truth(&mut self, truth: &DMatrix<f64>, avar: &DMatrix<f64>) -> Result<()> {
        let z = super::avar::studentize(&self.estimate_matrix(), truth, avar, self.n_t)?;
        let d = truth.nrows();
        let n4 = (self.n_t as f64).powf(0.25);
        self.stderr = Some(
            (0..d)
                .map(|a| {
                    (0..d)
                        .map(|b| {
                            let v = avar[(a * d + b, a * d + b)];
                            (v > 0.0).then(|| v.sqrt() / n4)
                        })
                        .collect()
                })
                .collect(),
        );
        self.z_scores = Some(z);
        Ok(())
    }
}

fn report(
    parts: &MrcParts,
    sync: &SyncGrid,
    theta: f64,
    weight: String,
    construction: Construction,
) -> Result<EstimateReport> {
    let n = sync.last_index();
    Ok(EstimateReport {
        estimate: matrix_rows(&parts.estimate()),
        bias_correction: matrix_rows(&parts.bias),
        n_t: n,
        k_n: parts.k,
        theta,
        weight,
        construction,
        stderr: None,
        z_scores: None,
        diagnostics: Diagnostics {
            long_run_variation: Some(long_run_variation(&sync.grid, n, parts.k, sync.horizon)?),
            tricity: None,
            grid_truncated: sync.truncated,
        },
    })
}

fn synchronized(schedules: &[TickSchedule], horizon: f64) -> Result<(SyncGrid, Vec<Vec<f64>>)> {
    let sync = synchronize(schedules, horizon)?;
    let values = sync.values(schedules)?;
    Ok((sync, values))
}

/// Synchronizes the tick data, sets `n = N_T` and `k = round(theta sqrt(n))`
/// and evaluates the estimator at the horizon.
pub fn mrc(
    schedules: &[TickSchedule],
    spec: &WeightSpec,
    theta: f64,
    horizon: f64,
    construction: Construction,
) -> Result<EstimateReport> {
    let (sync, values) = synchronized(schedules, horizon)?;
    let k = window_size(theta, sync.last_index().max(1))?;
    let parts = mrc_from_values(&values, spec, k, construction, false)?;
    report(&parts, &sync, theta, spec.name(), construction)
}

/// Jittered estimator with `exp(-rate |x|)` computed by the linear-time
/// recursion.
pub fn mrc_fast_exponential(schedules: &[TickSchedule], rate: f64, theta: f64, horizon: f64) -> Result<EstimateReport> {
    let spec = WeightSpec::new(WeightKind::double_exponential(rate)?)?;
    let (sync, values) = synchronized(schedules, horizon)?;
    let k = window_size(theta, sync.last_index().max(1))?;
    let parts = mrc_from_values(&values, &spec, k, Construction::Jittered, true)?;
    report(&parts, &sync, theta, spec.name(), Construction::Jittered)
}
