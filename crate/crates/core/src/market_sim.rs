//! Latent price paths, microstructure noise, jumps and their observation at
//! tick times.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::timegrid::TickSchedule;

/// Minimum number of Euler steps accepted by [`simulate_path`].
pub const MIN_FINE_STEPS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum VolModel {
    /// `sigma_s = loading` for all `s`.
    Constant { loading: DMatrix<f64> },
    /// `sigma_s = sqrt(v_s) loading` with a CIR variance
    /// `dv = kappa (mean - v) ds + vol_of_vol sqrt(v) dB`, where `B` has
    /// correlation `rho` with the first driving Brownian motion.
    Heston {
        loading: DMatrix<f64>,
        kappa: f64,
        mean: f64,
        vol_of_vol: f64,
        v0: f64,
        rho: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathModel {
    pub drift: Vec<f64>,
    pub vol: VolModel,
}

impl PathModel {
    /// One asset with constant volatility `sigma`.
    pub fn constant(sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::model(format!(
                "volatility {sigma} must be finite and non-negative"
            )));
        }
        Ok(PathModel {
            drift: vec![0.0],
            vol: VolModel::Constant {
                loading: DMatrix::from_element(1, 1, sigma),
            },
        })
    }

    /// Constant-volatility model with the given instantaneous covariance.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let loading = psd_sqrt(cov, "spot covariance")?;
        Ok(PathModel {
            drift: vec![0.0; cov.nrows()],
            vol: VolModel::Constant { loading },
        })
    }

    pub fn dim(&self) -> usize {
        self.loading().nrows()
    }

    pub fn loading(&self) -> &DMatrix<f64> {
        match &self.vol {
            VolModel::Constant { loading } | VolModel::Heston { loading, .. } => loading,
        }
    }

    /// `loading loading^T`, the spot covariance at unit variance level.
    pub fn base_covariance(&self) -> DMatrix<f64> {
        let l = self.loading();
        l * l.transpose()
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.loading();
        if l.nrows() == 0 || l.ncols() == 0 {
            return Err(Error::model("model dimension must be at least 1"));
        }
        if self.drift.len() != l.nrows() {
            return Err(Error::model("drift length does not match dimension"));
        }
        if l.iter().chain(&self.drift).any(|v| !v.is_finite()) {
            return Err(Error::model("non-finite model coefficient"));
        }
        if let VolModel::Heston {
            kappa,
            mean,
            vol_of_vol,
            v0,
            rho,
            ..
        } = &self.vol
        {
            if !(*kappa >= 0.0 && *mean >= 0.0 && *vol_of_vol >= 0.0 && *v0 >= 0.0) {
                return Err(Error::model("variance parameters must be non-negative"));
            }
            if !(-1.0..=1.0).contains(rho) {
                return Err(Error::model(format!("correlation {rho} outside [-1, 1]")));
            }
        }
        Ok(())
    }
}

/// Symmetric square root of a positive semidefinite matrix.
pub fn psd_sqrt(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::model(format!("{what} must be a non-empty square matrix")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::model(format!("{what} has non-finite entries")));
    }
    let asym = (m - m.transpose()).abs().max();
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    if asym > 1e-12 * scale {
        return Err(Error::model(format!("{what} is not symmetric")));
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if min < -1e-10 * scale {
        return Err(Error::model(format!(
            "{what} is not positive semidefinite (eigenvalue {min:e})"
        )));
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Simulated latent path on a uniform fine grid `j * step`.
#[derive(Debug, Clone)]
pub struct LatentPath {
    pub step: f64,
    pub horizon: f64,
    /// `x[k][j]` is asset `k` at time `j * step`.
    pub x: Vec<Vec<f64>>,
    /// Spot covariance is `scale[j] * base_cov` on step `j`; `scale` is empty
    /// for constant volatility.
    pub base_cov: DMatrix<f64>,
    pub scale: Vec<f64>,
    /// `cum_scale[j] = ∫_0^{j step} scale`, so `[X,X]_t = cum_scale * base_cov`.
    pub cum_scale: Vec<f64>,
}

impl LatentPath {
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn fine_steps(&self) -> usize {
        self.x[0].len() - 1
    }

    /// Index of the fine point at or before `t`.
    pub fn index_at(&self, t: f64) -> usize {
        ((t / self.step + 1e-9).floor().max(0.0) as usize).min(self.fine_steps())
    }

    pub fn value_at(&self, k: usize, t: f64) -> f64 {
        self.x[k][self.index_at(t)]
    }

    pub fn spot_scale(&self, j: usize) -> f64 {
        if self.scale.is_empty() {
            1.0
        } else {
            self.scale[j.min(self.scale.len() - 1)]
        }
    }

    /// True `[X,X]_t` on the fine grid.
    pub fn quadratic_covariation(&self, t: f64) -> DMatrix<f64> {
        &self.base_cov * self.cum_scale[self.index_at(t)]
    }

    /// Spot variance of asset `k` on each fine step.
    pub fn spot_variance(&self, k: usize) -> Vec<f64> {
        let b = self.base_cov[(k, k)];
        (0..self.fine_steps()).map(|j| b * self.spot_scale(j)).collect()
    }
}

/// Euler scheme for `X` with full-truncation Euler for the CIR variance.
pub fn simulate_path<R: Rng + ?Sized>(
    model: &PathModel,
    fine_steps: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<LatentPath> {
    model.validate()?;
    if fine_steps < MIN_FINE_STEPS {
        return Err(Error::input(format!("fine_steps must be at least {MIN_FINE_STEPS}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::input("horizon must be positive"));
    }
    let loading = model.loading();
    let (d, dp) = (loading.nrows(), loading.ncols());
    let h = horizon / fine_steps as f64;
    let sqrt_h = h.sqrt();
    let mut x = vec![Vec::with_capacity(fine_steps + 1); d];
    for xk in &mut x {
        xk.push(0.0);
    }
    let mut dw = vec![0.0; dp];
    let mut cur = vec![0.0; d];
    let rows: Vec<Vec<f64>> = (0..d).map(|k| loading.row(k).iter().copied().collect()).collect();
    let drift_step: Vec<f64> = model.drift.iter().map(|a| a * h).collect();

    let (scale, cum_scale) = match &model.vol {
        VolModel::Constant { .. } => {
            for _ in 0..fine_steps {
                for w in dw.iter_mut() {
                    *w = sqrt_h * rng.sample::<f64, _>(StandardNormal);
                }
                for k in 0..d {
                    let inc: f64 = rows[k].iter().zip(&dw).map(|(l, w)| l * w).sum();
                    cur[k] += drift_step[k] + inc;
                    x[k].push(cur[k]);
                }
            }
            let cum = (0..=fine_steps)
                .map(|j| j as f64 * horizon / fine_steps as f64)
                .collect();
            (Vec::new(), cum)
        }
        VolModel::Heston {
            kappa,
            mean,
            vol_of_vol,
            v0,
            rho,
            ..
        } => {
            let mut v = *v0;
            let mut scale = Vec::with_capacity(fine_steps);
            let mut cum = Vec::with_capacity(fine_steps + 1);
            cum.push(0.0);
            let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
            for _ in 0..fine_steps {
                let vp = v.max(0.0);
                for w in dw.iter_mut() {
                    *w = sqrt_h * rng.sample::<f64, _>(StandardNormal);
                }
                let db = rho * dw[0] + rho_c * sqrt_h * rng.sample::<f64, _>(StandardNormal);
                let sv = vp.sqrt();
                for k in 0..d {
                    let inc: f64 = rows[k].iter().zip(&dw).map(|(l, w)| l * w).sum();
                    cur[k] += drift_step[k] + sv * inc;
                    x[k].push(cur[k]);
                }
                scale.push(vp);
                cum.push(cum.last().unwrap() + vp * h);
                v += kappa * (mean - vp) * h + vol_of_vol * vp.sqrt() * db;
            }
            (scale, cum)
        }
    };

    Ok(LatentPath {
        step: h,
        horizon,
        x,
        base_cov: model.base_covariance(),
        scale,
        cum_scale,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseProfile {
    Constant,
    /// `Upsilon_t = factor(t) * cov`, linear between `(time, factor)` knots
    /// and flat outside them.
    PiecewiseLinear(Vec<(f64, f64)>),
}

/// Gaussian noise with (possibly time-varying) covariance `Upsilon_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub cov: DMatrix<f64>,
    pub profile: NoiseProfile,
    loading: DMatrix<f64>,
}

impl NoiseModel {
    pub fn new(cov: DMatrix<f64>, profile: NoiseProfile) -> Result<Self> {
        let loading = psd_sqrt(&cov, "noise covariance")?;
        if let NoiseProfile::PiecewiseLinear(knots) = &profile {
            if knots.is_empty() || knots.iter().any(|(_, f)| !(*f >= 0.0 && f.is_finite())) {
                return Err(Error::model("noise profile needs non-negative factors"));
            }
            if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::model("noise profile times must increase"));
            }
        }
        Ok(NoiseModel { cov, profile, loading })
    }

    pub fn constant(cov: DMatrix<f64>) -> Result<Self> {
        Self::new(cov, NoiseProfile::Constant)
    }

    /// Univariate constant noise with variance `upsilon`.
    pub fn scalar(upsilon: f64) -> Result<Self> {
        Self::constant(DMatrix::from_element(1, 1, upsilon))
    }

    pub fn none(d: usize) -> Self {
        Self::constant(DMatrix::zeros(d, d)).expect("zero matrix is PSD")
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn factor(&self, t: f64) -> f64 {
        match &self.profile {
            NoiseProfile::Constant => 1.0,
            NoiseProfile::PiecewiseLinear(knots) => {
                let i = knots.partition_point(|k| k.0 <= t);
                if i == 0 {
                    knots[0].1
                } else if i == knots.len() {
                    knots[i - 1].1
                } else {
                    let ((t0, f0), (t1, f1)) = (knots[i - 1], knots[i]);
                    f0 + (f1 - f0) * (t - t0) / (t1 - t0)
                }
            }
        }
    }

    /// `Upsilon_t`.
    pub fn cov_at(&self, t: f64) -> DMatrix<f64> {
        &self.cov * self.factor(t)
    }

    /// One joint draw of the noise vector at time `t`.
    pub fn draw<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.loading * z * self.factor(t).sqrt()
    }
}

/// Finite collection of jumps `(S_k, gamma_k)` with `0 < S_1 < ... < S_K < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpModel {
    pub times: Vec<f64>,
    /// `sizes[k]` is the jump vector at `times[k]`.
    pub sizes: Vec<Vec<f64>>,
}

impl JumpModel {
    pub fn fixed(times: Vec<f64>, sizes: Vec<Vec<f64>>) -> Result<Self> {
        if times.len() != sizes.len() {
            return Err(Error::model("jump times and sizes differ in length"));
        }
        if times.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(Error::model("jump times must lie strictly inside (0, 1)"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::model("jump times must increase"));
        }
        if let Some(first) = sizes.first() {
            if sizes.iter().any(|s| s.len() != first.len()) {
                return Err(Error::model("jump vectors differ in dimension"));
            }
        }
        Ok(JumpModel { times, sizes })
    }

    /// Poisson number of jumps with uniform times on `(0, 1)` and i.i.d.
    /// Gaussian sizes per asset.
    pub fn poisson<R: Rng + ?Sized>(
        intensity: f64,
        size_mean: f64,
        size_sd: f64,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let sizes_dist = Normal::new(size_mean, size_sd).map_err(|e| Error::model(e.to_string()))?;
        let count = if intensity > 0.0 {
            Poisson::new(intensity)
                .map_err(|e| Error::model(e.to_string()))?
                .sample(rng) as usize
        } else {
            0
        };
        let mut times: Vec<f64> = (0..count)
            .map(|_| loop {
                let u: f64 = rng.gen();
                if u > 0.0 {
                    break u;
                }
            })
            .collect();
        times.sort_by(f64::total_cmp);
        times.dedup();
        let sizes = times
            .iter()
            .map(|_| (0..dim).map(|_| sizes_dist.sample(rng)).collect())
            .collect();
        Self::fixed(times, sizes)
    }

    /// Sum of squared jumps of asset `k`.
    pub fn squared_sum(&self, k: usize) -> f64 {
        self.sizes.iter().map(|s| s[k] * s[k]).sum()
    }

    /// Cumulative jump of asset `k` up to and including time `t`.
    pub fn cumulative(&self, k: usize, t: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.sizes)
            .take_while(|(s, _)| **s <= t)
            .map(|(_, g)| g[k])
            .sum()
    }
}

/// Observes `path + noise + jumps` at every tick. Assets ticking at the same
/// instant (bitwise equal times) share one joint noise draw.
pub fn observe<R: Rng + ?Sized>(
    path: &LatentPath,
    schedules: &[TickSchedule],
    noise: &NoiseModel,
    jumps: Option<&JumpModel>,
    rng: &mut R,
) -> Result<Vec<TickSchedule>> {
    let d = schedules.len();
    if d != path.dim() || d != noise.dim() {
        return Err(Error::input("schedule, path and noise dimensions differ"));
    }
    if let Some(j) = jumps {
        if j.sizes.first().is_some_and(|s| s.len() != d) {
            return Err(Error::input("jump dimension differs from schedule dimension"));
        }
    }
    for s in schedules {
        s.check_horizon(path.horizon * (1.0 + 1e-12))?;
    }

    let mut events: Vec<(f64, usize, usize)> = schedules
        .iter()
        .enumerate()
        .flat_map(|(k, s)| s.times().iter().enumerate().map(move |(i, &t)| (t, k, i)))
        .collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut values: Vec<Vec<f64>> = schedules.iter().map(|s| vec![0.0; s.len()]).collect();
    let noiseless = noise.cov.iter().all(|v| *v == 0.0);
    let mut start = 0;
    while start < events.len() {
        let t = events[start].0;
        let end = start + events[start..].iter().take_while(|e| e.0 == t).count();
        let eps = if noiseless { None } else { Some(noise.draw(t, rng)) };
        let j = path.index_at(t);
        for &(_, k, i) in &events[start..end] {
            let mut v = path.x[k][j];
            if let Some(e) = &eps {
                v += e[k];
            }
            if let Some(jm) = jumps {
                v += jm.cumulative(k, t);
            }
            values[k][i] = v;
        }
        start = end;
    }

    schedules
        .iter()
        .zip(values)
        .map(|(s, v)| TickSchedule::with_values(s.asset_id, s.times().to_vec(), v))
        .collect()
}
