//! Parametric jump model `Z_i = sigma W_{i/n} + sum_k gamma_k 1{S_k <= i/n} + eps_i`:
//! differencing and MA(1) covariance matrices, their explicit
//! eigendecomposition, Fisher information entries and the MLE-type
//! jump-size estimator.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// `n x n` lower-bidiagonal differencing matrix (1 on the diagonal, -1 below).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LowerBidiagonal {
    pub n: usize,
}

impl LowerBidiagonal {
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(z.len());
        let mut prev = 0.0;
        for &x in z {
            out.push(x - prev);
            prev = x;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                1.0
            } else if i == j + 1 {
                -1.0
            } else {
                0.0
            }
        })
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    /// `off[i]` sits at `(i, i+1)` and `(i+1, i)`.
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `A x = b` with the Thomas algorithm.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::input("right-hand side has the wrong length"));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        let singular = |p: f64| Error::NumericFailure {
            what: "tridiagonal solve".into(),
            error_estimate: p.abs(),
        };
        if pivot.abs() < f64::MIN_POSITIVE {
            return Err(singular(pivot));
        }
        if n > 1 {
            c[0] = self.off[0] / pivot;
        }
        d[0] = b[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.off[i - 1] * c[i - 1];
            if pivot.abs() < f64::MIN_POSITIVE {
                return Err(singular(pivot));
            }
            if i + 1 < n {
                c[i] = self.off[i] / pivot;
            }
            d[i] = (b[i] - self.off[i - 1] * d[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.diag.clone()));
        for i in 0..n.saturating_sub(1) {
            m[(i, i + 1)] = self.off[i];
            m[(i + 1, i)] = self.off[i];
        }
        m
    }
}

fn check_params(n: usize, sigma: f64, upsilon: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::input("parametric model needs n >= 2"));
    }
    if !(sigma >= 0.0 && sigma.is_finite() && upsilon >= 0.0 && upsilon.is_finite()) {
        return Err(Error::input("sigma and upsilon must be finite and non-negative"));
    }
    Ok(())
}

/// `D_n` and the covariance `V_n` of `D_n Z` (diagonal `sigma^2/n + 2 Upsilon`,
/// first entry `sigma^2/n + Upsilon`, off-diagonal `-Upsilon`).
pub fn build_matrices(n: usize, sigma: f64, upsilon: f64) -> Result<(LowerBidiagonal, SymTridiagonal)> {
    check_params(n, sigma, upsilon)?;
    let s2 = sigma * sigma / n as f64;
    let mut diag = vec![s2 + 2.0 * upsilon; n];
    diag[0] = s2 + upsilon;
    Ok((
        LowerBidiagonal { n },
        SymTridiagonal {
            diag,
            off: vec![-upsilon; n - 1],
        },
    ))
}

/// Closed-form eigenpairs of `V_n`; indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaEigen {
    pub n: usize,
    pub sigma: f64,
    pub upsilon: f64,
}

impl MaEigen {
    pub fn new(n: usize, sigma: f64, upsilon: f64) -> Result<Self> {
        check_params(n, sigma, upsilon)?;
        Ok(MaEigen { n, sigma, upsilon })
    }

    /// `sigma^2/n + 4 Upsilon sin^2((pi/2)(2i-1)/(2n+1))`.
    pub fn lambda(&self, i: usize) -> f64 {
        let n = self.n as f64;
        let s = (0.5 * PI * (2.0 * i as f64 - 1.0) / (2.0 * n + 1.0)).sin();
        self.sigma * self.sigma / n + 4.0 * self.upsilon * s * s
    }

    /// `(2/sqrt(2n+1)) cos((2 pi/(2n+1))(i-1/2)(j-1/2))`.
    pub fn u(&self, i: usize, j: usize) -> f64 {
        let m = 2.0 * self.n as f64 + 1.0;
        2.0 / m.sqrt() * (2.0 * PI / m * (i as f64 - 0.5) * (j as f64 - 0.5)).cos()
    }

    pub fn u_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.u(i + 1, j + 1))
    }
}

/// `i(k) = ceil(n S_k)`.
pub fn jump_index(n: usize, s: f64) -> Result<usize> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::input(format!("jump time {s} must lie in (0, 1)")));
    }
    Ok(((n as f64 * s).ceil() as usize).clamp(1, n))
}

/// `n^{-1/2} sum_j U^{i(k) j} U^{i(l) j} / lambda_j` for jump times `s_k`, `s_l`.
pub fn fisher_entry(n: usize, sigma: f64, upsilon: f64, s_k: f64, s_l: f64) -> Result<f64> {
    let eig = MaEigen::new(n, sigma, upsilon)?;
    let (a, b) = (jump_index(n, s_k)?, jump_index(n, s_l)?);
    let sum: f64 = (1..=n).map(|j| eig.u(a, j) * eig.u(b, j) / eig.lambda(j)).sum();
    Ok(sum / (n as f64).sqrt())
}

/// `n^{-1/2} e_{i(k)}^T V_n^{-1} e_{i(l)}` through a tridiagonal solve.
pub fn fisher_entry_solve(n: usize, sigma: f64, upsilon: f64, s_k: f64, s_l: f64) -> Result<f64> {
    let (_, v) = build_matrices(n, sigma, upsilon)?;
    let (a, b) = (jump_index(n, s_k)?, jump_index(n, s_l)?);
    let mut e = vec![0.0; n];
    e[b - 1] = 1.0;
    Ok(v.solve(&e)?[a - 1] / (n as f64).sqrt())
}

/// `gamma_k = 2 sigma sqrt(Upsilon) n^{-1/2} (V_n^{-1} D_n z)_{i(k)}`.
pub fn jump_mle(z: &[f64], sigma: f64, upsilon: f64, jump_times: &[f64]) -> Result<Vec<f64>> {
    let n = z.len();
    if !(upsilon > 0.0) {
        return Err(Error::input("the jump estimator needs Upsilon > 0"));
    }
    let (d, v) = build_matrices(n, sigma, upsilon)?;
    let x = v.solve(&d.apply(z))?;
    let scale = 2.0 * sigma * upsilon.sqrt() / (n as f64).sqrt();
    jump_times
        .iter()
        .map(|&s| Ok(scale * x[jump_index(n, s)? - 1]))
        .collect()
}

/// Parameters of the parametric jump model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricModel {
    pub n: usize,
    pub sigma: f64,
    pub upsilon: f64,
    pub jump_times: Vec<f64>,
    pub jump_sizes: Vec<f64>,
}

impl ParametricModel {
    pub fn new(n: usize, sigma: f64, upsilon: f64, jump_times: Vec<f64>, jump_sizes: Vec<f64>) -> Result<Self> {
        check_params(n, sigma, upsilon)?;
        if !(upsilon > 0.0) {
            return Err(Error::input("the parametric model needs Upsilon > 0"));
        }
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::input("jump times and sizes differ in length"));
        }
        for &s in &jump_times {
            jump_index(n, s)?;
        }
        if jump_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("jump times must increase"));
        }
        Ok(ParametricModel {
            n,
            sigma,
            upsilon,
            jump_times,
            jump_sizes,
        })
    }

    /// Draws `Z_1, ..., Z_n`.
    pub fn simulate<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let nf = self.n as f64;
        let sd_w = self.sigma / nf.sqrt();
        let sd_e = self.upsilon.sqrt();
        let mut w = 0.0;
        (1..=self.n)
            .map(|i| {
                w += sd_w * rng.sample::<f64, _>(StandardNormal);
                let t = i as f64 / nf;
                let j: f64 = self
                    .jump_times
                    .iter()
                    .zip(&self.jump_sizes)
                    .filter(|(s, _)| **s <= t)
                    .map(|(_, g)| g)
                    .sum();
                w + j + sd_e * rng.sample::<f64, _>(StandardNormal)
            })
            .collect()
    }

    pub fn estimate(&self, z: &[f64]) -> Result<Vec<f64>> {
        jump_mle(z, self.sigma, self.upsilon, &self.jump_times)
    }

    /// Asymptotic variance `2 sigma sqrt(Upsilon)` of `n^{1/4}(gamma_hat - gamma)`.
    pub fn asymptotic_variance(&self) -> f64 {
        2.0 * self.sigma * self.upsilon.sqrt()
    }
}
