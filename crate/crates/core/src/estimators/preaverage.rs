//! Pre-averaged returns: the bounded-support construction, jittering and the
//! jittered construction for weights of unbounded support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::{discretize, DiscreteWeights, WeightKind, WeightSpec};

/// Tolerance below which weight samples are dropped.
pub const TRUNCATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    /// `sum_{p=1}^{k-1} g(p/k) (V_{i+p} - V_{i+p-1})`, `i = 0..=N-k+1`.
    Bounded,
    /// Weighted sums of jittered returns, `i = k..=N-k+1`.
    Jittered,
}

/// Pre-averaged blocks of every asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PreAveraged {
    pub construction: Construction,
    /// Index `i` of the first block.
    pub first_index: usize,
    /// `blocks[k][j]` belongs to asset `k` and block index `first_index + j`.
    pub blocks: Vec<Vec<f64>>,
}

impl PreAveraged {
    pub fn len(&self) -> usize {
        self.blocks.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Returns of an observed series after replacing the first and last `k`
/// observations by their averages.
#[derive(Debug, Clone, PartialEq)]
pub struct Jittered {
    pub k: usize,
    /// `N`, the last observation index of the raw series.
    pub last_index: usize,
    /// Adjusted returns for `p = k..=N-k+1`.
    pub returns: Vec<f64>,
}

impl Jittered {
    /// Adjusted return with original index `p`.
    pub fn at(&self, p: usize) -> f64 {
        self.returns[p - self.k]
    }
}

fn check_values(values: &[Vec<f64>]) -> Result<usize> {
    let first = values.first().ok_or_else(|| Error::input("no assets supplied"))?;
    if values.iter().any(|v| v.len() != first.len()) {
        return Err(Error::input("assets have different numbers of synchronized values"));
    }
    if first.is_empty() {
        return Err(Error::input("no observations supplied"));
    }
    Ok(first.len() - 1)
}

/// Bounded-support pre-averaging of one series.
pub fn preaverage_bounded_series(values: &[f64], weights: &DiscreteWeights) -> Result<Vec<f64>> {
    let k = weights.k;
    if weights.first != 1 || weights.last() != k as i64 - 1 {
        return Err(Error::input("bounded pre-averaging needs a weight supported on [0, 1]"));
    }
    let n = values.len().saturating_sub(1);
    if values.is_empty() || n < k {
        return Err(Error::input(format!("need N >= k, got N = {n}, k = {k}")));
    }
    let returns: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    // return index p (1-based) is returns[p - 1]
    Ok((0..=n - k + 1)
        .map(|i| {
            weights
                .samples
                .iter()
                .zip(&returns[i..i + k - 1])
                .map(|(g, r)| g * r)
                .sum()
        })
        .collect())
}

/// Bounded-support pre-averaging of every asset.
pub fn preaverage_bounded(values: &[Vec<f64>], spec: &WeightSpec, k: usize) -> Result<PreAveraged> {
    check_values(values)?;
    if !spec.is_bounded() {
        return Err(Error::input("bounded pre-averaging needs a weight supported on [0, 1]"));
    }
    let w = discretize(spec, k, TRUNCATION_TOL)?;
    Ok(PreAveraged {
        construction: Construction::Bounded,
        first_index: 0,
        blocks: values
            .iter()
            .map(|v| preaverage_bounded_series(v, &w))
            .collect::<Result<_>>()?,
    })
}

/// Jitters one series. Needs `N >= 2k + 1`.
pub fn jitter(values: &[f64], k: usize) -> Result<Jittered> {
    if k == 0 {
        return Err(Error::input("jitter window must be at least 1"));
    }
    let n = values.len().saturating_sub(1);
    if values.is_empty() || n < 2 * k + 1 {
        return Err(Error::input(format!("jittering needs N >= 2k+1, got N = {n}, k = {k}")));
    }
    let head = values[..k].iter().sum::<f64>() / k as f64;
    let tail = values[n - k + 1..].iter().sum::<f64>() / k as f64;
    let mut returns = Vec::with_capacity(n - 2 * k + 2);
    returns.push(values[k] - head);
    returns.extend(values[k..=n - k].windows(2).map(|w| w[1] - w[0]));
    returns.push(tail - values[n - k]);
    Ok(Jittered {
        k,
        last_index: n,
        returns,
    })
}

/// Jittered pre-averaging by direct summation, with weights truncated
/// according to `weights` (`|p - i| > d` dropped for unbounded weights).
pub fn preaverage_jittered_series(jit: &Jittered, weights: &DiscreteWeights) -> Vec<f64> {
    let k = jit.k;
    let hi_p = (jit.last_index - k + 1) as i64;
    (k as i64..=hi_p)
        .map(|i| {
            let lo = (k as i64).max(i + weights.first);
            let hi = hi_p.min(i + weights.last());
            if lo > hi {
                return 0.0;
            }
            let r = &jit.returns[(lo - k as i64) as usize..=(hi - k as i64) as usize];
            let w = &weights.samples[(lo - i - weights.first) as usize..=(hi - i - weights.first) as usize];
            r.iter().zip(w).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Jittered pre-averaging with `exp(-rate |x|)` by the forward/backward
/// recursions `y+_p = q y+_{p-1} + r_p` and the mirrored `y-`, `q = exp(-rate/k)`.
/// Block `i` equals `y+_i + y-_{N-i+1} - r_i`. No truncation is applied.
pub fn preaverage_exponential_series(jit: &Jittered, rate: f64) -> Vec<f64> {
    let q = (-rate / jit.k as f64).exp();
    let r = &jit.returns;
    let m = r.len();
    let mut fwd = vec![0.0; m];
    let mut acc = 0.0;
    for (f, x) in fwd.iter_mut().zip(r) {
        acc = q * acc + x;
        *f = acc;
    }
    // bwd[j] = sum_{j' >= j} q^{j'-j} r_{j'}, i.e. the backward recursion read in place
    let mut out = vec![0.0; m];
    acc = 0.0;
    for j in (0..m).rev() {
        acc = q * acc + r[j];
        out[j] = fwd[j] + acc - r[j];
    }
    out
}

/// Jittered blocks for every asset. Exponential weights use the linear-time
/// recursion when `fast` is set; otherwise direct truncated summation.
pub fn preaverage_jittered(values: &[Vec<f64>], spec: &WeightSpec, k: usize, fast: bool) -> Result<PreAveraged> {
    check_values(values)?;
    let jits = values.iter().map(|v| jitter(v, k)).collect::<Result<Vec<_>>>()?;
    let blocks = match (&spec.kind, fast) {
        (WeightKind::DoubleExp { rate }, true) => {
            jits.iter().map(|j| preaverage_exponential_series(j, *rate)).collect()
        }
        _ => {
            let w = discretize(spec, k, TRUNCATION_TOL)?;
            jits.iter().map(|j| preaverage_jittered_series(j, &w)).collect()
        }
    };
    Ok(PreAveraged {
        construction: Construction::Jittered,
        first_index: k,
        blocks,
    })
}
