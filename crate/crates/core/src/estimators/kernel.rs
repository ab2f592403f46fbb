//! Flat-top realized kernel
//! `RK = gamma_0 + sum_{h>=1} K((h-1)/H) (gamma_h + gamma_{-h})`.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::weights::{Component, WeightSpec};

/// Kernel values below this are treated as zero when choosing the maximal lag.
const KERNEL_CUTOFF: f64 = 1e-12;
/// Above this many lags the autocovariances come from an FFT.
const DIRECT_MAX_LAG: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Parzen,
    /// `(1 + x) e^{-x}`.
    Optimal,
    /// `phi_gg(x) / phi_gg(0)` of a weight.
    FromWeight(WeightSpec),
}

impl Kernel {
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.abs();
        match self {
            Kernel::Parzen => {
                if x <= 0.5 {
                    1.0 - 6.0 * x * x + 6.0 * x * x * x
                } else if x <= 1.0 {
                    2.0 * (1.0 - x).powi(3)
                } else {
                    0.0
                }
            }
            Kernel::Optimal => (1.0 + x) * (-x).exp(),
            Kernel::FromWeight(spec) => spec.phi(Component::G, Component::G, x).unwrap_or(0.0) / spec.constants.psi2,
        }
    }

    /// `x` beyond which the kernel is zero or negligible.
    fn reach(&self) -> f64 {
        match self {
            Kernel::Parzen => 1.0,
            Kernel::Optimal => 32.0,
            Kernel::FromWeight(spec) => match spec.kind.decay_rate() {
                None => 1.0,
                Some(rate) => {
                    let mut x = 1.0;
                    while self.eval(x) > KERNEL_CUTOFF {
                        x *= 1.25;
                    }
                    x.max(1.0 / rate)
                }
            },
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "parzen" => Ok(Kernel::Parzen),
            "opt" | "optimal" => Ok(Kernel::Optimal),
            other => match other.strip_prefix("weight:") {
                Some(w) => Ok(Kernel::FromWeight(WeightSpec::parse(w)?)),
                None => Err(Error::input(format!("unknown kernel '{name}'"))),
            },
        }
    }
}

/// `gamma_h = sum_{j > h} r_j r_{j-h}` for `h = 0..=max_lag` by direct summation.
pub fn autocovariances_direct(returns: &[f64], max_lag: usize) -> Vec<f64> {
    (0..=max_lag.min(returns.len().saturating_sub(1)))
        .map(|h| returns[h..].iter().zip(returns).map(|(a, b)| a * b).sum())
        .collect()
}

/// Same as [`autocovariances_direct`] via a zero-padded FFT.
pub fn autocovariances_fft(returns: &[f64], max_lag: usize) -> Vec<f64> {
    let n = returns.len();
    if n == 0 {
        return Vec::new();
    }
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<f64>> = returns.iter().map(|&r| Complex::new(r, 0.0)).collect();
    buf.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    inv.process(&mut buf);
    let scale = 1.0 / size as f64;
    buf.iter().take(max_lag.min(n - 1) + 1).map(|c| c.re * scale).collect()
}

/// Univariate flat-top realized kernel of `returns` with bandwidth `H >= 1`.
pub fn realized_kernel(returns: &[f64], kernel: &Kernel, bandwidth: f64) -> Result<f64> {
    if !(bandwidth >= 1.0 && bandwidth.is_finite()) {
        return Err(Error::input(format!("bandwidth {bandwidth} must be at least 1")));
    }
    if returns.is_empty() {
        return Ok(0.0);
    }
    let max_lag = ((kernel.reach() * bandwidth).floor() as usize + 1).min(returns.len() - 1);
    let gamma = if max_lag > DIRECT_MAX_LAG {
        autocovariances_fft(returns, max_lag)
    } else {
        autocovariances_direct(returns, max_lag)
    };
    let mut rk = gamma[0];
    for (h, g) in gamma.iter().enumerate().skip(1) {
        rk += kernel.eval((h - 1) as f64 / bandwidth) * 2.0 * g;
    }
    Ok(rk)
}
