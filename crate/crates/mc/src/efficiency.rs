//! Efficiency comparison of noise-robust estimators against the parametric
//! bound `8 sigma^3 sqrt(Upsilon)` for integrated variance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use preavg_core::estimators::{avar_univariate, optimal_theta, Kernel};
use preavg_core::weights::WeightSpec;

use crate::config::{ConfigError, EstimatorKind, ScenarioConfig};
use crate::summary::{run_scenario, RunError};

#[derive(Debug, Error)]
pub enum EfficiencyError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("scenario '{0}' needs constant sigma and upsilon")]
    NotParametric(String),
    #[error("{0}")]
    Numeric(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub name: String,
    pub estimator: String,
    pub weight: String,
    pub theta: f64,
    pub n: usize,
    /// Monte Carlo variance of `n^{1/4}` times the estimation error.
    pub mc_var: Option<f64>,
    pub bound: f64,
    /// `mc_var / bound`; absent when the bound is zero.
    pub ratio: Option<f64>,
    /// Asymptotic variance over the bound, from the closed-form constants.
    pub theory_ratio: Option<f64>,
    /// Set when `Upsilon = 0`, where the bound collapses and ratios are undefined.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyTable {
    pub rows: Vec<EfficiencyRow>,
}

impl EfficiencyTable {
    /// Rows sorted by increasing Monte Carlo variance.
    pub fn ranking(&self) -> Vec<&EfficiencyRow> {
        let mut rows: Vec<&EfficiencyRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            a.mc_var
                .unwrap_or(f64::INFINITY)
                .total_cmp(&b.mc_var.unwrap_or(f64::INFINITY))
        });
        rows
    }

    pub fn row(&self, name: &str) -> Option<&EfficiencyRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub fn kernel_name(kernel: &Kernel) -> String {
    match kernel {
        Kernel::Parzen => "parzen".into(),
        Kernel::Optimal => "opt".into(),
        Kernel::FromWeight(s) => format!("weight:{}", s.name()),
    }
}

/// `8 sigma^3 sqrt(Upsilon)`.
pub fn parametric_bound(sigma: f64, upsilon: f64) -> f64 {
    8.0 * sigma.powi(3) * upsilon.sqrt()
}

/// The three standard contenders: tent-weighted MRC at its own optimal
/// `theta`, double-exponential MRC and the realized kernel with `(1+x)e^{-x}`,
/// both at `sqrt(Upsilon) / sigma`.
pub fn standard_configs(
    sigma: f64,
    upsilon: f64,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<Vec<ScenarioConfig>, EfficiencyError> {
    let (theta_tent, theta_exp) = if upsilon > 0.0 && sigma > 0.0 {
        let t =
            optimal_theta(&WeightSpec::tent(), sigma, upsilon).map_err(|e| EfficiencyError::Numeric(e.to_string()))?;
        (t, upsilon.sqrt() / sigma)
    } else {
        (1.0, 1.0)
    };
    let base = format!(
        "replications = {replications}\nseed = {seed}\nn = [{n}]\n[path]\nsigma = {sigma:?}\n[noise]\nupsilon = {upsilon:?}\n[scheme]\nkind = \"equidistant\"\n"
    );
    let specs = [
        (
            "mrc-tent",
            format!("[estimator]\nkind = \"mrc\"\nweight = \"tent\"\ntheta = {theta_tent:?}\n"),
        ),
        (
            "mrc-doubleexp",
            format!("[estimator]\nkind = \"mrc-fast\"\nweight = \"doubleexp\"\ntheta = {theta_exp:?}\n"),
        ),
        (
            "rk-opt",
            format!("[estimator]\nkind = \"rk\"\nkernel = \"opt\"\ntheta = {theta_exp:?}\n"),
        ),
    ];
    specs
        .into_iter()
        .map(|(name, est)| Ok(ScenarioConfig::parse(&format!("name = \"{name}\"\n{base}{est}"))?))
        .collect()
}

/// Runs every config at its first sample size and tabulates Monte Carlo
/// variances against the parametric bound.
pub fn compare_efficiency(configs: &[ScenarioConfig], workers: usize) -> Result<EfficiencyTable, EfficiencyError> {
    let mut rows = Vec::with_capacity(configs.len());
    for cfg in configs {
        let (Some(sigma), Some(upsilon)) = (cfg.constant_sigma(), cfg.constant_upsilon()) else {
            return Err(EfficiencyError::NotParametric(cfg.name.clone()));
        };
        let mut one = cfg.clone();
        one.n.truncate(1);
        let run = run_scenario(&one, workers)?;
        let res = &run.summary.results[0];
        let mc_var = res.entries.first().and_then(|e| e.scaled_error_var);
        let bound = parametric_bound(sigma, upsilon);
        let degenerate = !(upsilon > 0.0);
        let est = &cfg.estimator;
        let theory_spec = match (est.kind, &est.kernel) {
            (EstimatorKind::Rk, Kernel::Optimal) => {
                Some(WeightSpec::double_exponential(1.0).map_err(|e| EfficiencyError::Numeric(e.to_string()))?)
            }
            (EstimatorKind::Rk, Kernel::FromWeight(s)) => Some(s.clone()),
            (EstimatorKind::Rk, Kernel::Parzen) => None,
            _ => Some(est.weight.clone()),
        };
        let theory_ratio = theory_spec
            .filter(|_| !degenerate)
            .map(|s| avar_univariate(&s, est.theta, sigma * sigma, upsilon, cfg.horizon) * cfg.horizon / bound);
        rows.push(EfficiencyRow {
            name: cfg.name.clone(),
            estimator: est.kind.name().into(),
            weight: match est.kind {
                EstimatorKind::Rk => kernel_name(&est.kernel),
                _ => est.weight.name(),
            },
            theta: est.theta,
            n: res.n,
            mc_var,
            bound,
            ratio: if degenerate { None } else { mc_var.map(|v| v / bound) },
            theory_ratio,
            degenerate,
        });
    }
    Ok(EfficiencyTable { rows })
}
