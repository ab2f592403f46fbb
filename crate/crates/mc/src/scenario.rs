//! One Monte Carlo replication: simulate, synchronize, estimate, studentize.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use preavg_core::estimators::{
    avar_univariate, default_threshold_constant, jitter, mrc_from_values, oracle_avar, preaverage_jittered,
    realized_kernel, studentize, threshold_from_values, tricity, v_c_v_j, Kernel, SpotPath,
};
use preavg_core::market_sim::{observe, simulate_path, JumpModel, LatentPath, VolModel};
use preavg_core::param_jump::ParametricModel;
use preavg_core::timegrid::{
    long_run_variation, poisson_g_limit, sample_equidistant, sample_hitting_barriers, sample_poisson, synchronize,
    FinePath, TickSchedule,
};
use preavg_core::weights::{window_size, WeightSpec};

use crate::config::{EstimatorKind, JumpSpec, ScenarioConfig, Scheme};

/// Points of the spot-quantity grid used for the oracle variance integral.
const SPOT_GRID_POINTS: usize = 65;
/// Minimum number of fine steps of a simulated path.
const MIN_FINE_STEPS: usize = 1000;

/// One estimated quantity of a replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryValue {
    pub estimate: f64,
    pub truth: f64,
    /// Studentized error against the oracle variance, when one is available.
    pub z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub n_t: usize,
    pub k_n: usize,
    pub entries: Vec<EntryValue>,
    pub extras: BTreeMap<&'static str, f64>,
}

/// Labels of the entries every replication of `cfg` reports, in order.
pub fn entry_labels(cfg: &ScenarioConfig) -> Vec<String> {
    match cfg.estimator.kind {
        EstimatorKind::Mrc | EstimatorKind::MrcFast => {
            let d = cfg.dim();
            if d == 1 {
                return vec!["iv".into()];
            }
            let mut out = Vec::new();
            for a in 0..d {
                for b in a..d {
                    out.push(format!("cov[{a},{b}]"));
                }
            }
            out
        }
        EstimatorKind::Rk => vec!["iv".into()],
        EstimatorKind::Threshold => vec!["iv".into(), "jv".into(), "qv".into()],
        EstimatorKind::ParamJump => match &cfg.jumps {
            Some(JumpSpec::Fixed(j)) => (0..j.times.len()).map(|i| format!("gamma[{i}]")).collect(),
            _ => Vec::new(),
        },
    }
}

/// Random stream of replication `rep` at the `n_index`-th sample size.
pub fn replication_rng(seed: u64, n_index: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n_index as u64) << 32) | rep as u64);
    rng
}

/// Runs replication `rep` of `cfg` at sample size `cfg.n[n_index]`.
pub fn run_replication(cfg: &ScenarioConfig, n_index: usize, rep: usize) -> Result<RepRecord, String> {
    let n = cfg.n[n_index];
    let mut rng = replication_rng(cfg.seed, n_index, rep);
    if cfg.estimator.kind == EstimatorKind::ParamJump {
        return param_jump_rep(cfg, n, rep, &mut rng);
    }
    let sim = simulate(cfg, n, &mut rng)?;
    estimate(cfg, n, rep, &sim)
}

/// Observed tick data of replication `rep` at sample size `cfg.n[n_index]`.
pub fn simulate_ticks(cfg: &ScenarioConfig, n_index: usize, rep: usize) -> Result<Vec<TickSchedule>, String> {
    let n = *cfg
        .n
        .get(n_index)
        .ok_or_else(|| format!("no sample size with index {n_index}"))?;
    let mut rng = replication_rng(cfg.seed, n_index, rep);
    if cfg.estimator.kind == EstimatorKind::ParamJump {
        return Err("param-jump scenarios have no tick data; use the param-jump command".into());
    }
    Ok(simulate(cfg, n, &mut rng)?.observed)
}

struct Simulated {
    path: LatentPath,
    observed: Vec<TickSchedule>,
    jumps: Option<JumpModel>,
}

fn fine_steps(cfg: &ScenarioConfig, n: usize) -> usize {
    let exact = cfg.scheme == Scheme::Equidistant && matches!(cfg.path.vol, VolModel::Constant { .. });
    if exact {
        // Brownian motion is sampled exactly at the grid points.
        n * MIN_FINE_STEPS.div_ceil(n)
    } else {
        (n * cfg.fine_factor).max(MIN_FINE_STEPS)
    }
}

fn simulate(cfg: &ScenarioConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<Simulated, String> {
    let d = cfg.dim();
    let path = simulate_path(&cfg.path, fine_steps(cfg, n), cfg.horizon, rng).map_err(|e| e.to_string())?;
    let schedules = match &cfg.scheme {
        Scheme::Equidistant => {
            let base = sample_equidistant(n, cfg.horizon).map_err(|e| e.to_string())?;
            (0..d)
                .map(|k| TickSchedule::new(k as u32 + 1, base.times().to_vec()))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?
        }
        Scheme::Poisson { intensities } => {
            sample_poisson(intensities, n, cfg.horizon, rng).map_err(|e| e.to_string())?
        }
        Scheme::Hitting { alpha, beta } => {
            let var = path.spot_variance(0);
            let fine = FinePath {
                step: path.step,
                values: &path.x[0],
                spot_variance: Some(&var),
            };
            let hits = sample_hitting_barriers(*alpha, *beta, n, fine, cfg.horizon, Some(&mut *rng))
                .map_err(|e| e.to_string())?;
            vec![hits.schedule]
        }
    };
    let jumps = match &cfg.jumps {
        None => None,
        Some(JumpSpec::Fixed(j)) => Some(j.clone()),
        Some(JumpSpec::Poisson {
            intensity,
            size_mean,
            size_sd,
        }) => Some(JumpModel::poisson(*intensity, *size_mean, *size_sd, d, rng).map_err(|e| e.to_string())?),
    };
    let observed = observe(&path, &schedules, &cfg.noise, jumps.as_ref(), rng).map_err(|e| e.to_string())?;
    Ok(Simulated { path, observed, jumps })
}

/// Limit of the scaled expected duration at time `t` for the scheme.
fn g_true(cfg: &ScenarioConfig, path: &LatentPath, t: f64) -> Result<f64, String> {
    match &cfg.scheme {
        Scheme::Equidistant => Ok(cfg.horizon),
        Scheme::Poisson { intensities } => poisson_g_limit(intensities).map_err(|e| e.to_string()),
        Scheme::Hitting { alpha, beta } => {
            let var = path.base_cov[(0, 0)] * path.spot_scale(path.index_at(t));
            Ok(alpha * beta / var)
        }
    }
}

fn chi(cfg: &ScenarioConfig) -> DMatrix<f64> {
    let d = cfg.dim();
    match cfg.scheme {
        Scheme::Poisson { .. } => DMatrix::identity(d, d),
        _ => DMatrix::from_element(d, d, 1.0),
    }
}

/// Spot quantities on `[t0, t1]`, with `G` rescaled from the scheme's `n` to
/// the realized grid size `n_t`.
fn spot_path(
    cfg: &ScenarioConfig,
    path: &LatentPath,
    n: usize,
    n_t: usize,
    t0: f64,
    t1: f64,
) -> Result<SpotPath, String> {
    let ratio = n_t as f64 / n as f64;
    let m = SPOT_GRID_POINTS;
    let mut sp = SpotPath {
        times: Vec::new(),
        sigma: Vec::new(),
        upsilon: Vec::new(),
        chi: chi(cfg),
        g: Vec::new(),
    };
    for i in 0..m {
        let t = t0 + (t1 - t0) * i as f64 / (m - 1) as f64;
        let j = path.index_at(t).min(path.fine_steps().saturating_sub(1));
        sp.times.push(t);
        sp.sigma.push(&path.base_cov * path.spot_scale(j));
        sp.upsilon.push(cfg.noise.cov_at(t));
        sp.g.push(g_true(cfg, path, t)? * ratio);
    }
    Ok(sp)
}

fn realized_jumps(jumps: Option<&JumpModel>, t0: f64, t1: f64, d: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(d, d);
    if let Some(j) = jumps {
        for (t, g) in j.times.iter().zip(&j.sizes) {
            if *t > t0 && *t <= t1 {
                for a in 0..d {
                    for b in 0..d {
                        out[(a, b)] += g[a] * g[b];
                    }
                }
            }
        }
    }
    out
}

fn estimate(cfg: &ScenarioConfig, n: usize, rep: usize, sim: &Simulated) -> Result<RepRecord, String> {
    let est = &cfg.estimator;
    let d = cfg.dim();
    let sync = synchronize(&sim.observed, cfg.horizon).map_err(|e| e.to_string())?;
    let values = sync.values(&sim.observed).map_err(|e| e.to_string())?;
    let n_t = sync.last_index();
    if n_t < 4 {
        return Err(format!("only {n_t} synchronized returns"));
    }
    let (t0, t1) = (sync.grid[0], sync.grid[n_t]);
    let jump_qv = realized_jumps(sim.jumps.as_ref(), t0, t1, d);
    let has_jumps = jump_qv.iter().any(|v| *v != 0.0);
    let truth = sim.path.quadratic_covariation(t1) - sim.path.quadratic_covariation(t0) + &jump_qv;
    let theta_eff_of = |k: usize| k as f64 / (n_t as f64).sqrt();

    let mut extras = BTreeMap::new();
    extras.insert("grid_truncated", if sync.truncated { 1.0 } else { 0.0 });
    if let Some(m) = est.lrv_m {
        extras.insert(
            "lrv",
            long_run_variation(&sync.grid, n, m, cfg.horizon).map_err(|e| e.to_string())?,
        );
    }

    let k = match est.kind {
        EstimatorKind::Rk => (est.theta * (n_t as f64).sqrt()).ceil().max(1.0) as usize,
        _ => window_size(est.theta, n_t).map_err(|e| e.to_string())?,
    };
    if n_t < 2 * k + 1 {
        return Err(format!("N_T = {n_t} too small for k_n = {k}"));
    }

    if est.tricity {
        let latent: Vec<f64> = sync.per_asset[0].iter().map(|&t| sim.path.value_at(0, t)).collect();
        let blocks = preaverage_jittered(&[latent], &est.weight, k, true).map_err(|e| e.to_string())?;
        extras.insert("tricity", tricity(&blocks.blocks[0], n_t, k));
    }

    let constant = (cfg.constant_sigma(), cfg.constant_upsilon());
    let entries = match est.kind {
        EstimatorKind::Mrc | EstimatorKind::MrcFast => {
            let fast = est.kind == EstimatorKind::MrcFast;
            let parts = mrc_from_values(&values, &est.weight, k, est.construction, fast).map_err(|e| e.to_string())?;
            let estimate = parts.estimate();
            let z = if has_jumps {
                None
            } else {
                let sp = spot_path(cfg, &sim.path, n, n_t, t0, t1)?;
                let avar = oracle_avar(&sp, &est.weight, theta_eff_of(k), t1).map_err(|e| e.to_string())?;
                Some(studentize(&estimate, &truth, &avar, n_t).map_err(|e| e.to_string())?)
            };
            let mut out = Vec::new();
            for a in 0..d {
                for b in a..d {
                    out.push(EntryValue {
                        estimate: estimate[(a, b)],
                        truth: truth[(a, b)],
                        z: z.as_ref().and_then(|z| z[a][b]),
                    });
                }
            }
            out
        }
        EstimatorKind::Rk => {
            let jit = jitter(&values[0], k).map_err(|e| e.to_string())?;
            let h = est.theta * (n_t as f64).sqrt();
            let rk = realized_kernel(&jit.returns, &est.kernel, h.max(1.0)).map_err(|e| e.to_string())?;
            let spec = match &est.kernel {
                Kernel::Optimal => Some(WeightSpec::double_exponential(1.0).map_err(|e| e.to_string())?),
                Kernel::FromWeight(s) => Some(s.clone()),
                Kernel::Parzen => None,
            };
            let z = match (spec, constant, has_jumps) {
                (Some(spec), (Some(sig), Some(ups)), false) => {
                    let g = g_true(cfg, &sim.path, t0)? * n_t as f64 / n as f64;
                    let v = avar_univariate(&spec, h / (n_t as f64).sqrt(), sig * sig, ups, g) * (t1 - t0);
                    (v > 0.0).then(|| (n_t as f64).powf(0.25) * (rk - truth[(0, 0)]) / v.sqrt())
                }
                _ => None,
            };
            vec![EntryValue {
                estimate: rk,
                truth: truth[(0, 0)],
                z,
            }]
        }
        EstimatorKind::Threshold => {
            let c = match (est.c, constant) {
                (Some(c), _) => c,
                (None, (Some(sig), Some(ups))) => {
                    default_threshold_constant(&[&est.weight, &est.jump_weight], k, n_t, sig, ups, est.w)
                }
                _ => return Err("threshold constant c is required without constant sigma and upsilon".into()),
            };
            let dec = threshold_from_values(&values[0], &est.weight, &est.jump_weight, k, c, est.w)
                .map_err(|e| e.to_string())?;
            extras.insert("exceed_count", dec.exceed_count as f64);
            extras.insert("rho", dec.rho);
            let iv_truth = truth[(0, 0)] - jump_qv[(0, 0)];
            let jv_truth = jump_qv[(0, 0)];
            let n4 = (n_t as f64).powf(0.25);
            let (z_iv, z_jv) = match constant {
                (Some(sig), Some(ups)) if matches!(cfg.scheme, Scheme::Equidistant) => {
                    let theta = theta_eff_of(k);
                    let span = t1 - t0;
                    let (vc, _) = v_c_v_j(&est.weight, theta, sig, ups, jv_truth).map_err(|e| e.to_string())?;
                    let (_, vj) = v_c_v_j(&est.jump_weight, theta, sig, ups, jv_truth).map_err(|e| e.to_string())?;
                    let vc = vc * span;
                    let z = |e: f64, t: f64, v: f64| (v > 0.0).then(|| n4 * (e - t) / v.sqrt());
                    (z(dec.iv, iv_truth, vc), z(dec.jv, jv_truth, vj))
                }
                _ => (None, None),
            };
            vec![
                EntryValue {
                    estimate: dec.iv,
                    truth: iv_truth,
                    z: z_iv,
                },
                EntryValue {
                    estimate: dec.jv,
                    truth: jv_truth,
                    z: z_jv,
                },
                EntryValue {
                    estimate: dec.qv,
                    truth: truth[(0, 0)],
                    z: None,
                },
            ]
        }
        EstimatorKind::ParamJump => unreachable!("handled before simulation"),
    };
    Ok(RepRecord {
        rep,
        n_t,
        k_n: k,
        entries,
        extras,
    })
}

fn param_jump_rep(cfg: &ScenarioConfig, n: usize, rep: usize, rng: &mut ChaCha8Rng) -> Result<RepRecord, String> {
    let (Some(sigma), Some(upsilon), Some(JumpSpec::Fixed(j))) =
        (cfg.constant_sigma(), cfg.constant_upsilon(), &cfg.jumps)
    else {
        return Err("param-jump needs constant sigma, constant noise and fixed jumps".into());
    };
    let sizes: Vec<f64> = j.sizes.iter().map(|s| s[0]).collect();
    let model = ParametricModel::new(n, sigma, upsilon, j.times.clone(), sizes.clone()).map_err(|e| e.to_string())?;
    let z = model.simulate(rng);
    let gamma = model.estimate(&z).map_err(|e| e.to_string())?;
    let sd = model.asymptotic_variance().sqrt();
    let n4 = (n as f64).powf(0.25);
    let entries = gamma
        .iter()
        .zip(&sizes)
        .map(|(&g, &truth)| EntryValue {
            estimate: g,
            truth,
            z: (sd > 0.0).then(|| n4 * (g - truth) / sd),
        })
        .collect();
    Ok(RepRecord {
        rep,
        n_t: n,
        k_n: 0,
        entries,
        extras: BTreeMap::new(),
    })
}
