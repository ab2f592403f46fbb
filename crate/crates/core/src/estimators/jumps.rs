//! Threshold pre-averaging estimators for the diffusive and jump parts of the
//! quadratic variation, and the tricity diagnostic.

use serde::{Deserialize, Serialize};

use super::mrc::realized_covariance;
use super::preaverage::preaverage_jittered;
use crate::error::{Error, Result};
use crate::timegrid::{synchronize, TickSchedule};
use crate::weights::{window_size, WeightSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpDecomposition {
    pub iv: f64,
    pub jv: f64,
    pub qv: f64,
    /// Threshold `rho_n = c n^{-w}` applied to the blocks.
    pub rho: f64,
    pub c: f64,
    pub w: f64,
    pub k_n: usize,
    pub n_t: usize,
    /// Number of jump-weight blocks above the threshold.
    pub exceed_count: usize,
    pub total_blocks: usize,
}

/// Standard deviation of one jittered block under Brownian motion plus
/// white noise: `sqrt(psi1 Upsilon / k + psi2 k sigma^2 / n)`.
pub fn block_std(spec: &WeightSpec, k: usize, n: usize, sigma: f64, upsilon: f64) -> f64 {
    let c = &spec.constants;
    let kf = k as f64;
    (c.psi1 * upsilon / kf + c.psi2 * kf * sigma * sigma / n as f64).sqrt()
}

/// Default threshold constant: `c = 5 max_g(block_std) n^w`, so that
/// `rho_n` equals five block standard deviations at this `n`.
pub fn default_threshold_constant(specs: &[&WeightSpec], k: usize, n: usize, sigma: f64, upsilon: f64, w: f64) -> f64 {
    let sd = specs
        .iter()
        .map(|s| block_std(s, k, n, sigma, upsilon))
        .fold(0.0, f64::max);
    5.0 * sd * (n as f64).powf(w)
}

fn check_w(w: f64) -> Result<()> {
    if !(w > 0.125 && w < 0.25) {
        return Err(Error::input(format!(
            "threshold exponent w = {w} must lie in (1/8, 1/4)"
        )));
    }
    Ok(())
}

/// Threshold estimators on one synchronized series with window `k`.
/// `n` sets the threshold `rho = c n^{-w}`. Exponential weights use the
/// linear-time recursion.
pub fn threshold_from_values(
    values: &[f64],
    spec_iv: &WeightSpec,
    spec_jv: &WeightSpec,
    k: usize,
    c: f64,
    w: f64,
) -> Result<JumpDecomposition> {
    check_w(w)?;
    if !(c > 0.0) {
        return Err(Error::input("threshold constant must be positive"));
    }
    let n = values.len().saturating_sub(1);
    let rho = c * (n as f64).powf(-w);
    let series = [values.to_vec()];
    let b_iv = preaverage_jittered(&series, spec_iv, k, true)?;
    let b_jv = if spec_jv == spec_iv {
        b_iv.clone()
    } else {
        preaverage_jittered(&series, spec_jv, k, true)?
    };
    let kf = k as f64;
    let ci = spec_iv.constants;
    let below: f64 = b_iv.blocks[0].iter().filter(|y| y.abs() <= rho).map(|y| y * y).sum();
    let qv_raw = realized_covariance(&series)[(0, 0)];
    let iv = below / (ci.psi2 * kf) - ci.psi1 / (2.0 * ci.psi2 * kf * kf) * qv_raw;
    let above: Vec<f64> = b_jv.blocks[0].iter().copied().filter(|y| y.abs() > rho).collect();
    let jv = above.iter().map(|y| y * y).sum::<f64>() / (spec_jv.constants.psi2 * kf);
    Ok(JumpDecomposition {
        iv,
        jv,
        qv: iv + jv,
        rho,
        c,
        w,
        k_n: k,
        n_t: n,
        exceed_count: above.len(),
        total_blocks: b_jv.len(),
    })
}

/// Threshold estimators on univariate tick data.
pub fn threshold_estimators(
    schedule: &TickSchedule,
    spec_iv: &WeightSpec,
    spec_jv: &WeightSpec,
    c: f64,
    w: f64,
    theta: f64,
    horizon: f64,
) -> Result<JumpDecomposition> {
    check_w(w)?;
    let sync = synchronize(std::slice::from_ref(schedule), horizon)?;
    let values = sync.values(std::slice::from_ref(schedule))?.remove(0);
    let k = window_size(theta, sync.last_index().max(1))?;
    threshold_from_values(&values, spec_iv, spec_jv, k, c, w)
}

/// `sqrt(n) / k^{3/2} sum_i X_i^3` over latent pre-averaged blocks.
pub fn tricity(blocks: &[f64], n: usize, k: usize) -> f64 {
    let s: f64 = blocks.iter().map(|x| x * x * x).sum();
    (n as f64).sqrt() / (k as f64).powf(1.5) * s
}
