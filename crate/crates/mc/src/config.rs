//! Scenario configuration files (TOML).
//!
//! ```toml
//! name = "clt-equidistant"
//! replications = 1000
//! seed = 7
//! n = [10000]
//! horizon = 1.0            # optional, default 1
//! output_dir = "out/clt"   # optional
//!
//! [path]
//! sigma = 1.0                           # one asset, constant volatility
//! # covariance = [[1.0, 0.5], [0.5, 1.0]]
//! # drift = [0.0]
//! # [path.heston]
//! # kappa = 5.0; mean = 1.0; vol_of_vol = 0.5; v0 = 1.0; rho = -0.5
//!
//! [noise]                               # optional, default no noise
//! upsilon = 0.01                        # or covariance = [[...]]
//! # profile = [[0.0, 1.0], [1.0, 2.0]]  # (time, factor) knots
//!
//! [jumps]                               # optional
//! times = [0.5]
//! sizes = [1.0]
//! # or: intensity = 2.0, size_mean = 0.0, size_sd = 1.0
//!
//! [scheme]
//! kind = "equidistant"                  # | "poisson" | "hitting"
//! # intensities = [1.0, 1.0]
//! # alpha = 1.0; beta = 1.0
//! # fine_factor = 100
//!
//! [estimator]
//! kind = "mrc-fast"                     # mrc | mrc-fast | rk | threshold | param-jump
//! weight = "doubleexp"
//! theta = "oracle"                      # or a number
//! # construction = "jittered"           # | "bounded"
//! # kernel = "opt"                      # rk only
//! # jump_weight = "doubleexp:sqrt5"     # threshold only
//! # c = 0.1; w = 0.2                    # threshold only
//! # tricity = true; lrv_m = 100         # diagnostics
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;
use thiserror::Error;

use preavg_core::estimators::{Construction, Kernel};
use preavg_core::market_sim::{JumpModel, NoiseModel, NoiseProfile, PathModel, VolModel};
use preavg_core::weights::{window_size, WeightSpec};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config is not valid TOML: {0}")]
    Syntax(String),
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

const TOP_KEYS: &[&str] = &[
    "name",
    "replications",
    "seed",
    "n",
    "horizon",
    "output_dir",
    "workers",
    "path",
    "noise",
    "jumps",
    "scheme",
    "estimator",
];
const PATH_KEYS: &[&str] = &["sigma", "covariance", "drift", "heston"];
const HESTON_KEYS: &[&str] = &["kappa", "mean", "vol_of_vol", "v0", "rho"];
const NOISE_KEYS: &[&str] = &["upsilon", "covariance", "profile"];
const JUMP_KEYS: &[&str] = &["times", "sizes", "intensity", "size_mean", "size_sd"];
const SCHEME_KEYS: &[&str] = &["kind", "intensities", "alpha", "beta", "fine_factor"];
const ESTIMATOR_KEYS: &[&str] = &[
    "kind",
    "weight",
    "theta",
    "construction",
    "kernel",
    "jump_weight",
    "c",
    "w",
    "tricity",
    "lrv_m",
];

#[derive(Debug, Deserialize)]
struct RawConfig {
    name: Option<String>,
    replications: usize,
    seed: u64,
    n: Vec<usize>,
    horizon: Option<f64>,
    output_dir: Option<PathBuf>,
    workers: Option<usize>,
    path: RawPath,
    noise: Option<RawNoise>,
    jumps: Option<RawJumps>,
    scheme: RawScheme,
    estimator: RawEstimator,
}

#[derive(Debug, Deserialize)]
struct RawPath {
    sigma: Option<f64>,
    covariance: Option<Vec<Vec<f64>>>,
    drift: Option<Vec<f64>>,
    heston: Option<RawHeston>,
}

#[derive(Debug, Deserialize)]
struct RawHeston {
    kappa: f64,
    mean: f64,
    vol_of_vol: f64,
    v0: Option<f64>,
    rho: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RawNoise {
    upsilon: Option<f64>,
    covariance: Option<Vec<Vec<f64>>>,
    profile: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Deserialize)]
struct RawJumps {
    times: Option<Vec<f64>>,
    sizes: Option<Vec<f64>>,
    intensity: Option<f64>,
    size_mean: Option<f64>,
    size_sd: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct RawScheme {
    kind: String,
    intensities: Option<Vec<f64>>,
    alpha: Option<f64>,
    beta: Option<f64>,
    fine_factor: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawTheta {
    Number(f64),
    Word(String),
}

#[derive(Debug, Deserialize)]
struct RawEstimator {
    kind: String,
    weight: Option<String>,
    theta: Option<RawTheta>,
    construction: Option<String>,
    kernel: Option<String>,
    jump_weight: Option<String>,
    c: Option<f64>,
    w: Option<f64>,
    tricity: Option<bool>,
    lrv_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JumpSpec {
    Fixed(JumpModel),
    Poisson {
        intensity: f64,
        size_mean: f64,
        size_sd: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    Equidistant,
    Poisson { intensities: Vec<f64> },
    Hitting { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Mrc,
    MrcFast,
    Rk,
    Threshold,
    ParamJump,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Mrc => "mrc",
            EstimatorKind::MrcFast => "mrc-fast",
            EstimatorKind::Rk => "rk",
            EstimatorKind::Threshold => "threshold",
            EstimatorKind::ParamJump => "param-jump",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub weight: WeightSpec,
    pub theta: f64,
    pub theta_is_oracle: bool,
    pub construction: Construction,
    pub kernel: Kernel,
    pub jump_weight: WeightSpec,
    pub c: Option<f64>,
    pub w: f64,
    pub tricity: bool,
    pub lrv_m: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub replications: usize,
    pub seed: u64,
    pub n: Vec<usize>,
    pub horizon: f64,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub path: PathModel,
    pub noise: NoiseModel,
    pub jumps: Option<JumpSpec>,
    pub scheme: Scheme,
    pub fine_factor: usize,
    pub estimator: EstimatorConfig,
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parses and validates a config, reporting every problem found.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: toml::Value = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let mut problems = unknown_keys(&value);
        let raw: RawConfig = match value.try_into() {
            Ok(raw) => raw,
            Err(e) => {
                problems.push(e.to_string().trim().to_string());
                return Err(ConfigError::Invalid(problems));
            }
        };
        match build(raw, &mut problems) {
            Some(cfg) if problems.is_empty() => Ok(cfg),
            _ => Err(ConfigError::Invalid(problems)),
        }
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }

    /// Constant spot volatility of a univariate model, if it has one.
    pub fn constant_sigma(&self) -> Option<f64> {
        match &self.path.vol {
            VolModel::Constant { .. } if self.dim() == 1 => Some(self.path.base_covariance()[(0, 0)].sqrt()),
            _ => None,
        }
    }

    /// Constant noise variance of a univariate model, if it has one.
    pub fn constant_upsilon(&self) -> Option<f64> {
        (self.noise.profile == NoiseProfile::Constant && self.dim() == 1).then(|| self.noise.cov[(0, 0)])
    }
}

fn unknown_keys(value: &toml::Value) -> Vec<String> {
    let mut out = Vec::new();
    let check = |table: &toml::Value, prefix: &str, allowed: &[&str], out: &mut Vec<String>| {
        if let Some(t) = table.as_table() {
            for key in t.keys() {
                if !allowed.contains(&key.as_str()) {
                    out.push(format!("unknown key '{prefix}{key}'"));
                }
            }
        }
    };
    check(value, "", TOP_KEYS, &mut out);
    let sections: [(&str, &[&str]); 5] = [
        ("path", PATH_KEYS),
        ("noise", NOISE_KEYS),
        ("jumps", JUMP_KEYS),
        ("scheme", SCHEME_KEYS),
        ("estimator", ESTIMATOR_KEYS),
    ];
    for (name, keys) in sections {
        if let Some(sec) = value.get(name) {
            check(sec, &format!("{name}."), keys, &mut out);
        }
    }
    if let Some(h) = value.get("path").and_then(|p| p.get("heston")) {
        check(h, "path.heston.", HESTON_KEYS, &mut out);
    }
    out
}

fn matrix(rows: &[Vec<f64>], what: &str, problems: &mut Vec<String>) -> Option<DMatrix<f64>> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        problems.push(format!("{what} must be a non-empty square matrix"));
        return None;
    }
    Some(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
}

fn build(raw: RawConfig, problems: &mut Vec<String>) -> Option<ScenarioConfig> {
    if raw.replications < 1 {
        problems.push("replications must be at least 1".into());
    }
    if raw.n.is_empty() {
        problems.push("n must list at least one sample size".into());
    }
    let horizon = raw.horizon.unwrap_or(1.0);
    if !(horizon > 0.0 && horizon.is_finite()) {
        problems.push("horizon must be positive".into());
    }
    if raw.workers == Some(0) {
        problems.push("workers must be at least 1".into());
    }

    let path = build_path(&raw.path, problems);
    let d = path.as_ref().map_or(1, PathModel::dim);
    let noise = build_noise(raw.noise.as_ref(), d, problems);
    let jumps = raw.jumps.as_ref().and_then(|j| build_jumps(j, d, problems));
    let (scheme, fine_factor) = build_scheme(&raw.scheme, d, problems)?;
    let estimator = build_estimator(&raw.estimator, path.as_ref(), noise.as_ref(), problems)?;

    match estimator.kind {
        EstimatorKind::Rk | EstimatorKind::Threshold | EstimatorKind::ParamJump if d != 1 => problems.push(format!(
            "estimator.kind = '{}' needs a univariate path",
            estimator.kind.name()
        )),
        _ => {}
    }
    if estimator.kind == EstimatorKind::ParamJump {
        if scheme != Scheme::Equidistant {
            problems.push("param-jump scenarios need scheme.kind = 'equidistant'".into());
        }
        if !matches!(jumps, Some(JumpSpec::Fixed(_))) {
            problems.push("param-jump scenarios need fixed jumps (jumps.times and jumps.sizes)".into());
        }
        if path
            .as_ref()
            .is_some_and(|p| !matches!(p.vol, VolModel::Constant { .. }))
        {
            problems.push("param-jump scenarios need constant volatility".into());
        }
    }
    if estimator.kind != EstimatorKind::ParamJump {
        for &n in &raw.n {
            match window_size(estimator.theta, n) {
                Ok(k) if n >= 4 * k => {}
                Ok(k) => problems.push(format!("n = {n} is below 4 k_n = {}", 4 * k)),
                Err(e) => problems.push(e.to_string()),
            }
        }
    }

    Some(ScenarioConfig {
        name: raw.name.unwrap_or_else(|| "scenario".into()),
        replications: raw.replications,
        seed: raw.seed,
        n: raw.n,
        horizon,
        output_dir: raw.output_dir,
        workers: raw.workers,
        path: path?,
        noise: noise?,
        jumps,
        scheme,
        fine_factor,
        estimator,
    })
}

fn build_path(raw: &RawPath, problems: &mut Vec<String>) -> Option<PathModel> {
    let loading = match (raw.sigma, &raw.covariance) {
        (Some(s), None) => {
            if !(s >= 0.0) {
                problems.push("path.sigma must be non-negative".into());
                return None;
            }
            DMatrix::from_element(1, 1, s)
        }
        (None, Some(c)) => {
            let m = matrix(c, "path.covariance", problems)?;
            match PathModel::from_covariance(&m) {
                Ok(p) => p.loading().clone(),
                Err(e) => {
                    problems.push(format!("path.covariance: {e}"));
                    return None;
                }
            }
        }
        _ => {
            problems.push("path needs exactly one of 'sigma' or 'covariance'".into());
            return None;
        }
    };
    let d = loading.nrows();
    let drift = raw.drift.clone().unwrap_or_else(|| vec![0.0; d]);
    let vol = match &raw.heston {
        None => VolModel::Constant { loading },
        Some(h) => VolModel::Heston {
            loading,
            kappa: h.kappa,
            mean: h.mean,
            vol_of_vol: h.vol_of_vol,
            v0: h.v0.unwrap_or(h.mean),
            rho: h.rho.unwrap_or(0.0),
        },
    };
    let model = PathModel { drift, vol };
    if let Err(e) = model.validate() {
        problems.push(format!("path: {e}"));
        return None;
    }
    Some(model)
}

fn build_noise(raw: Option<&RawNoise>, d: usize, problems: &mut Vec<String>) -> Option<NoiseModel> {
    let Some(raw) = raw else {
        return Some(NoiseModel::none(d));
    };
    let cov = match (raw.upsilon, &raw.covariance) {
        (Some(u), None) if d == 1 => DMatrix::from_element(1, 1, u),
        (Some(u), None) => DMatrix::identity(d, d) * u,
        (None, Some(c)) => matrix(c, "noise.covariance", problems)?,
        (None, None) => DMatrix::zeros(d, d),
        (Some(_), Some(_)) => {
            problems.push("noise takes either 'upsilon' or 'covariance', not both".into());
            return None;
        }
    };
    if cov.nrows() != d {
        problems.push(format!(
            "noise dimension {} differs from path dimension {d}",
            cov.nrows()
        ));
        return None;
    }
    let profile = match &raw.profile {
        None => NoiseProfile::Constant,
        Some(knots) => NoiseProfile::PiecewiseLinear(knots.clone()),
    };
    NoiseModel::new(cov, profile)
        .map_err(|e| problems.push(format!("noise: {e}")))
        .ok()
}

fn build_jumps(raw: &RawJumps, d: usize, problems: &mut Vec<String>) -> Option<JumpSpec> {
    if d != 1 {
        problems.push("jumps are supported for univariate paths only".into());
        return None;
    }
    match (&raw.times, &raw.sizes, raw.intensity) {
        (Some(t), Some(s), None) => JumpModel::fixed(t.clone(), s.iter().map(|x| vec![*x]).collect())
            .map(JumpSpec::Fixed)
            .map_err(|e| problems.push(format!("jumps: {e}")))
            .ok(),
        (None, None, Some(intensity)) => {
            let size_mean = raw.size_mean.unwrap_or(0.0);
            let size_sd = raw.size_sd.unwrap_or(1.0);
            if !(intensity >= 0.0 && size_sd >= 0.0) {
                problems.push("jumps.intensity and jumps.size_sd must be non-negative".into());
                return None;
            }
            Some(JumpSpec::Poisson {
                intensity,
                size_mean,
                size_sd,
            })
        }
        _ => {
            problems.push("jumps need either 'times' and 'sizes' or 'intensity'".into());
            None
        }
    }
}

fn build_scheme(raw: &RawScheme, d: usize, problems: &mut Vec<String>) -> Option<(Scheme, usize)> {
    let fine_factor = raw.fine_factor.unwrap_or(100);
    if fine_factor < 1 {
        problems.push("scheme.fine_factor must be at least 1".into());
    }
    let scheme = match raw.kind.as_str() {
        "equidistant" => Scheme::Equidistant,
        "poisson" => {
            let intensities = raw.intensities.clone().unwrap_or_else(|| vec![1.0; d]);
            if intensities.len() != d {
                problems.push(format!("scheme.intensities needs {d} entries"));
            }
            if intensities.iter().any(|p| !(*p > 0.0)) {
                problems.push("scheme.intensities must be positive".into());
            }
            Scheme::Poisson { intensities }
        }
        "hitting" => {
            let (alpha, beta) = (raw.alpha.unwrap_or(1.0), raw.beta.unwrap_or(1.0));
            if !(alpha > 0.0 && beta > 0.0) {
                problems.push("scheme.alpha and scheme.beta must be positive".into());
            }
            if d != 1 {
                problems.push("hitting-barrier sampling needs a univariate path".into());
            }
            Scheme::Hitting { alpha, beta }
        }
        other => {
            problems.push(format!("unknown scheme.kind '{other}'"));
            return None;
        }
    };
    Some((scheme, fine_factor))
}

fn build_estimator(
    raw: &RawEstimator,
    path: Option<&PathModel>,
    noise: Option<&NoiseModel>,
    problems: &mut Vec<String>,
) -> Option<EstimatorConfig> {
    let kind = match raw.kind.as_str() {
        "mrc" => EstimatorKind::Mrc,
        "mrc-fast" => EstimatorKind::MrcFast,
        "rk" => EstimatorKind::Rk,
        "threshold" => EstimatorKind::Threshold,
        "param-jump" => EstimatorKind::ParamJump,
        other => {
            problems.push(format!("unknown estimator.kind '{other}'"));
            return None;
        }
    };
    let default_weight = if kind == EstimatorKind::Mrc {
        "tent"
    } else {
        "doubleexp"
    };
    let weight = WeightSpec::parse(raw.weight.as_deref().unwrap_or(default_weight))
        .map_err(|e| problems.push(format!("estimator.weight: {e}")))
        .ok()?;
    if kind == EstimatorKind::MrcFast && weight.kind.decay_rate().is_none() {
        problems.push("estimator.kind = 'mrc-fast' needs a doubleexp weight".into());
    }
    let jump_weight = match &raw.jump_weight {
        Some(w) => WeightSpec::parse(w)
            .map_err(|e| problems.push(format!("estimator.jump_weight: {e}")))
            .ok()?,
        None => weight.clone(),
    };
    let kernel = Kernel::parse(raw.kernel.as_deref().unwrap_or("opt"))
        .map_err(|e| problems.push(format!("estimator.kernel: {e}")))
        .ok()?;
    let construction = match raw.construction.as_deref().unwrap_or("jittered") {
        "jittered" => Construction::Jittered,
        "bounded" => {
            if !weight.is_bounded() {
                problems.push("construction 'bounded' needs a weight supported on [0, 1]".into());
            }
            Construction::Bounded
        }
        other => {
            problems.push(format!("unknown estimator.construction '{other}'"));
            Construction::Jittered
        }
    };

    let parametric = path.is_some_and(|p| p.dim() == 1 && matches!(p.vol, VolModel::Constant { .. }))
        && noise.is_some_and(|n| n.profile == NoiseProfile::Constant);
    let (theta, theta_is_oracle) = match &raw.theta {
        Some(RawTheta::Number(t)) if *t > 0.0 => (*t, false),
        Some(RawTheta::Number(t)) => {
            problems.push(format!("estimator.theta = {t} must be positive"));
            (1.0, false)
        }
        Some(RawTheta::Word(w)) if w == "oracle" => {
            let sig = path.map(|p| p.base_covariance()[(0, 0)].sqrt()).unwrap_or(0.0);
            let ups = noise.map(|n| n.cov[(0, 0)]).unwrap_or(0.0);
            if !parametric {
                problems.push("theta = 'oracle' needs a univariate constant-volatility, constant-noise model".into());
                (1.0, true)
            } else if !(sig > 0.0 && ups > 0.0) {
                problems.push("theta = 'oracle' needs sigma > 0 and upsilon > 0".into());
                (1.0, true)
            } else {
                (ups.sqrt() / sig, true)
            }
        }
        Some(RawTheta::Word(w)) => {
            problems.push(format!("estimator.theta must be a number or 'oracle', got '{w}'"));
            (1.0, false)
        }
        None if kind == EstimatorKind::ParamJump => (1.0, false),
        None => {
            problems.push("estimator.theta is required".into());
            (1.0, false)
        }
    };
    let w = raw.w.unwrap_or(0.2);
    if kind == EstimatorKind::Threshold && !(w > 0.125 && w < 0.25) {
        problems.push(format!("estimator.w = {w} must lie in (1/8, 1/4)"));
    }
    if raw.c.is_some_and(|c| !(c > 0.0)) {
        problems.push("estimator.c must be positive".into());
    }
    if raw.lrv_m == Some(0) {
        problems.push("estimator.lrv_m must be at least 1".into());
    }
    Some(EstimatorConfig {
        kind,
        weight,
        theta,
        theta_is_oracle,
        construction,
        kernel,
        jump_weight,
        c: raw.c,
        w,
        tricity: raw.tricity.unwrap_or(false),
        lrv_m: raw.lrv_m,
    })
}

/// Keys accepted anywhere in a config, for documentation and tests.
pub fn known_keys() -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    out.extend(TOP_KEYS.iter().map(|k| k.to_string()));
    for (p, keys) in [
        ("path", PATH_KEYS),
        ("path.heston", HESTON_KEYS),
        ("noise", NOISE_KEYS),
        ("jumps", JUMP_KEYS),
        ("scheme", SCHEME_KEYS),
        ("estimator", ESTIMATOR_KEYS),
    ] {
        out.extend(keys.iter().map(|k| format!("{p}.{k}")));
    }
    out
}
