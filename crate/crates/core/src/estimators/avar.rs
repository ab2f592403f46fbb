//! Oracle asymptotic covariance of the estimator and studentization.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::weights::{Constants, WeightSpec};

/// Spot quantities along a time grid, used as simulation truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SpotPath {
    pub times: Vec<f64>,
    pub sigma: Vec<DMatrix<f64>>,
    pub upsilon: Vec<DMatrix<f64>>,
    /// Limit probability that two assets tick together (ones on the diagonal).
    pub chi: DMatrix<f64>,
    /// Limit of the scaled refresh durations.
    pub g: Vec<f64>,
}

impl SpotPath {
    /// Time-constant spot quantities on `[0, horizon]`.
    pub fn constant(horizon: f64, sigma: DMatrix<f64>, upsilon: DMatrix<f64>, chi: DMatrix<f64>, g: f64) -> Self {
        SpotPath {
            times: vec![0.0, horizon],
            sigma: vec![sigma.clone(), sigma],
            upsilon: vec![upsilon.clone(), upsilon],
            chi,
            g: vec![g, g],
        }
    }

    fn validate(&self) -> Result<usize> {
        let m = self.times.len();
        if m < 2 || self.sigma.len() != m || self.upsilon.len() != m || self.g.len() != m {
            return Err(Error::input("spot path needs at least two aligned points"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::input("spot path times must increase"));
        }
        if let Some(g) = self.g.iter().find(|g| !(**g > 0.0)) {
            return Err(Error::input(format!("G must be positive, found {g}")));
        }
        let d = self.chi.nrows();
        let shapes_ok = self.chi.is_square()
            && self
                .sigma
                .iter()
                .chain(&self.upsilon)
                .all(|s| s.nrows() == d && s.ncols() == d);
        if !shapes_ok || d == 0 {
            return Err(Error::input("spot path matrices have inconsistent shapes"));
        }
        Ok(d)
    }
}

/// Integrand of the asymptotic covariance at one time point.
fn integrand(c: &Constants, theta: f64, s: &DMatrix<f64>, u: &DMatrix<f64>, g: f64) -> DMatrix<f64> {
    let d = s.nrows();
    let mut out = DMatrix::zeros(d * d, d * d);
    for k in 0..d {
        for l in 0..d {
            for kp in 0..d {
                for lp in 0..d {
                    let ss = s[(k, kp)] * s[(l, lp)] + s[(k, lp)] * s[(l, kp)];
                    let uu = u[(k, kp)] * u[(l, lp)] + u[(k, lp)] * u[(l, kp)];
                    let su = s[(k, kp)] * u[(l, lp)]
                        + s[(l, kp)] * u[(k, lp)]
                        + s[(l, lp)] * u[(k, kp)]
                        + s[(k, lp)] * u[(l, kp)];
                    out[(k * d + l, kp * d + lp)] =
                        c.phi22 * theta * ss * g + c.phi11 / theta.powi(3) * uu / g + c.phi12 / theta * su;
                }
            }
        }
    }
    out * (2.0 / (c.psi2 * c.psi2))
}

/// Asymptotic conditional covariance over `[0, t]`, a `d^2 x d^2` matrix
/// indexed by `(k d + l, k' d + l')`. Noise enters through `Upsilon ⊙ chi`;
/// the integral uses the trapezoid rule on the path grid.
pub fn oracle_avar(path: &SpotPath, spec: &WeightSpec, theta: f64, t: f64) -> Result<DMatrix<f64>> {
    let d = path.validate()?;
    if !(theta > 0.0) {
        return Err(Error::input("theta must be positive"));
    }
    if t < path.times[0] || t > *path.times.last().unwrap() {
        return Err(Error::input(format!("t = {t} outside the spot path grid")));
    }
    let values: Vec<DMatrix<f64>> = (0..path.times.len())
        .map(|i| {
            let u = path.upsilon[i].component_mul(&path.chi);
            integrand(&spec.constants, theta, &path.sigma[i], &u, path.g[i])
        })
        .collect();
    let mut total = DMatrix::zeros(d * d, d * d);
    for i in 1..path.times.len() {
        let (t0, t1) = (path.times[i - 1], path.times[i]);
        if t0 >= t {
            break;
        }
        let end = t1.min(t);
        let frac = (end - t0) / (t1 - t0);
        let right = &values[i - 1] + (&values[i] - &values[i - 1]) * frac;
        total += (&values[i - 1] + right) * (0.5 * (end - t0));
    }
    Ok(total)
}

/// `v_C^2 / t` for one asset with constant spot quantities and general `G`.
pub fn avar_univariate(spec: &WeightSpec, theta: f64, sigma2: f64, upsilon: f64, g: f64) -> f64 {
    let c = &spec.constants;
    4.0 / (c.psi2 * c.psi2)
        * (c.phi22 * theta * sigma2 * sigma2 * g
            + 2.0 * c.phi12 * sigma2 * upsilon / theta
            + c.phi11 * upsilon * upsilon / (theta.powi(3) * g))
}

/// `(v_C^2, v_J^2)` of the threshold estimators in the parametric model.
pub fn v_c_v_j(spec: &WeightSpec, theta: f64, sigma: f64, upsilon: f64, jump_sum: f64) -> Result<(f64, f64)> {
    if sigma < 0.0 || upsilon < 0.0 || jump_sum < 0.0 {
        return Err(Error::input("sigma, upsilon and the jump sum must be non-negative"));
    }
    let c = &spec.constants;
    let s2 = sigma * sigma;
    let vc = avar_univariate(spec, theta, s2, upsilon, 1.0);
    let vj = 8.0 / (c.psi2 * c.psi2) * (c.phi22 * theta * s2 + c.phi12 * upsilon / theta) * jump_sum;
    Ok((vc, vj))
}

/// `theta` minimizing the univariate asymptotic variance, by golden-section
/// search on `log theta`. For `exp(-|x|)` this is `sqrt(Upsilon) / sigma`.
pub fn optimal_theta(spec: &WeightSpec, sigma: f64, upsilon: f64) -> Result<f64> {
    if !(sigma > 0.0 && upsilon > 0.0) {
        return Err(Error::input("optimal theta needs sigma > 0 and Upsilon > 0"));
    }
    let f = |lt: f64| avar_univariate(spec, lt.exp(), sigma * sigma, upsilon, 1.0);
    let center = (upsilon.sqrt() / sigma).ln();
    let (mut a, mut b) = (center - 6.0, center + 6.0);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    while b - a > 1e-12 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - r * (b - a);
        d = a + r * (b - a);
    }
    Ok((0.5 * (a + b)).exp())
}

/// `z^{kl} = n^{1/4} (estimate - truth) / sqrt(avar^{kl,kl})`; entries with
/// non-positive variance are `None`.
pub fn studentize(
    estimate: &DMatrix<f64>,
    truth: &DMatrix<f64>,
    avar: &DMatrix<f64>,
    n: usize,
) -> Result<Vec<Vec<Option<f64>>>> {
    let d = estimate.nrows();
    if truth.shape() != estimate.shape() || avar.shape() != (d * d, d * d) {
        return Err(Error::input("studentization inputs have inconsistent shapes"));
    }
    let n4 = (n as f64).powf(0.25);
    Ok((0..d)
        .map(|k| {
            (0..d)
                .map(|l| {
                    let v = avar[(k * d + l, k * d + l)];
                    (v > 0.0).then(|| n4 * (estimate[(k, l)] - truth[(k, l)]) / v.sqrt())
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }

    #[test]
    fn univariate_reduces_to_closed_form() {
        let spec = WeightSpec::tent();
        let (sigma, ups, theta) = (1.3, 0.2, 0.7);
        let path = SpotPath::constant(1.0, scalar(sigma * sigma), scalar(ups), scalar(1.0), 1.0);
        let a = oracle_avar(&path, &spec, theta, 1.0).unwrap()[(0, 0)];
        let (vc, _) = v_c_v_j(&spec, theta, sigma, ups, 0.0).unwrap();
        assert!((a - vc).abs() < 1e-12 * vc);
    }

    #[test]
    fn efficiency_bound_at_oracle_theta() {
        let spec = WeightSpec::double_exponential(1.0).unwrap();
        for (sigma, ups) in [(1.0, 1.0), (1.0, 0.01), (0.3, 0.002)] {
            let theta = f64::sqrt(ups) / sigma;
            let (vc, _) = v_c_v_j(&spec, theta, sigma, ups, 0.0).unwrap();
            let bound = 8.0 * sigma * sigma * sigma * f64::sqrt(ups);
            assert!((vc - bound).abs() <= 1e-10 * bound.max(1.0));
        }
    }

    #[test]
    fn noiseless_reduction_scales_with_time() {
        let spec = WeightSpec::tent();
        let c = spec.constants;
        let path = SpotPath::constant(2.0, scalar(1.0), scalar(0.0), scalar(1.0), 1.7);
        let a = oracle_avar(&path, &spec, 0.5, 1.5).unwrap()[(0, 0)];
        let expected = 4.0 / (c.psi2 * c.psi2) * c.phi22 * 0.5 * 1.7 * 1.5;
        assert!((a - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn jump_variance_minimum() {
        let g2 = WeightSpec::double_exponential(5f64.sqrt()).unwrap();
        let (sigma, ups): (f64, f64) = (0.7, 0.3);
        let theta = ups.sqrt() / sigma;
        let (_, vj) = v_c_v_j(&g2, theta, sigma, ups, 2.0).unwrap();
        let target = 4.0 * 5f64.sqrt() * sigma * ups.sqrt() * 2.0;
        assert!((vj - target).abs() < 1e-12 * target);
        let (_, zero) = v_c_v_j(&g2, theta, sigma, ups, 0.0).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn bivariate_tensor_is_symmetric_and_rejects_bad_g() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let u = DMatrix::from_row_slice(2, 2, &[0.1, 0.02, 0.02, 0.3]);
        let spec = WeightSpec::tent();
        let path = SpotPath::constant(1.0, s.clone(), u.clone(), DMatrix::identity(2, 2), 1.2);
        let a = oracle_avar(&path, &spec, 0.4, 1.0).unwrap();
        assert!((&a - a.transpose()).abs().max() < 1e-12);
        let bad = SpotPath::constant(1.0, s, u, DMatrix::identity(2, 2), 0.0);
        assert!(oracle_avar(&bad, &spec, 0.4, 1.0).is_err());
    }

    #[test]
    fn optimal_theta_for_double_exponential() {
        let spec = WeightSpec::double_exponential(1.0).unwrap();
        let t = optimal_theta(&spec, 1.0, 0.01).unwrap();
        assert!((t - 0.1).abs() < 1e-6);
        let tent = optimal_theta(&WeightSpec::tent(), 1.0, 0.01).unwrap();
        let v_tent = avar_univariate(&WeightSpec::tent(), tent, 1.0, 0.01, 1.0);
        assert!(v_tent > 0.8);
    }

    #[test]
    fn studentize_examples() {
        let m = scalar(2.0);
        let z = studentize(&m, &m, &scalar(1.0), 10_000).unwrap();
        assert_eq!(z[0][0], Some(0.0));
        let z = studentize(&scalar(2.1), &m, &scalar(0.0), 10_000).unwrap();
        assert_eq!(z[0][0], None);
        let z = studentize(&scalar(2.1), &m, &scalar(4.0), 10_000).unwrap();
        assert!((z[0][0].unwrap() - 0.5).abs() < 1e-12);
    }
}
