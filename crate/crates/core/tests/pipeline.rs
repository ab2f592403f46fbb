use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use preavg_core::estimators::{mrc, mrc_fast_exponential, Construction};
use preavg_core::market_sim::{observe, simulate_path, JumpModel, NoiseModel, PathModel};
use preavg_core::param_jump::ParametricModel;
use preavg_core::timegrid::{sample_equidistant, sample_poisson, TickSchedule};
use preavg_core::weights::WeightSpec;

fn noisy_equidistant(seed: u64, n: usize, upsilon: f64, jumps: Option<&JumpModel>) -> Vec<TickSchedule> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = simulate_path(&PathModel::constant(1.0).unwrap(), 10 * n, 1.0, &mut rng).unwrap();
    let ticks = vec![sample_equidistant(n, 1.0).unwrap()];
    observe(&path, &ticks, &NoiseModel::scalar(upsilon).unwrap(), jumps, &mut rng).unwrap()
}

#[test]
fn noisy_unit_variance_is_recovered() {
    let obs = noisy_equidistant(11, 20_000, 1e-4, None);
    let report = mrc(&obs, &WeightSpec::tent(), 0.5, 1.0, Construction::Bounded).unwrap();
    assert_eq!(report.n_t, 20_000);
    assert!((report.estimate[0][0] - 1.0).abs() < 0.15, "{}", report.estimate[0][0]);
}

#[test]
fn fast_entry_point_matches_generic_double_exponential() {
    let obs = noisy_equidistant(12, 5_000, 1e-3, None);
    let fast = mrc_fast_exponential(&obs, 1.0, 0.3, 1.0).unwrap();
    let direct = mrc(
        &obs,
        &WeightSpec::double_exponential(1.0).unwrap(),
        0.3,
        1.0,
        Construction::Jittered,
    )
    .unwrap();
    assert_eq!(fast.k_n, direct.k_n);
    let (a, b) = (fast.estimate[0][0], direct.estimate[0][0]);
    assert!((a - b).abs() <= 1e-9 * b.abs());
}

#[test]
fn bivariate_poisson_covariance_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.6, 2.0]);
    let path = simulate_path(&PathModel::from_covariance(&cov).unwrap(), 200_000, 1.0, &mut rng).unwrap();
    let ticks = sample_poisson(&[1.0, 0.7], 20_000, 1.0, &mut rng).unwrap();
    let noise = NoiseModel::constant(DMatrix::from_diagonal_element(2, 2, 1e-4)).unwrap();
    let obs = observe(&path, &ticks, &noise, None, &mut rng).unwrap();
    let report = mrc(
        &obs,
        &WeightSpec::double_exponential(1.0).unwrap(),
        0.4,
        1.0,
        Construction::Jittered,
    )
    .unwrap();
    let truth = path.quadratic_covariation(1.0);
    for a in 0..2 {
        for b in 0..2 {
            let err = report.estimate[a][b] - truth[(a, b)];
            assert!(
                err.abs() < 0.25 * truth[(a, a)].max(truth[(b, b)]),
                "entry ({a},{b}) off by {err}"
            );
        }
    }
    assert_eq!(report.estimate[0][1], report.estimate[1][0]);
}

#[test]
fn jump_moves_every_later_observation() {
    let jumps = JumpModel::fixed(vec![0.5], vec![vec![1.0]]).unwrap();
    let with = noisy_equidistant(14, 400, 0.0, Some(&jumps));
    let without = noisy_equidistant(14, 400, 0.0, None);
    let (t, a, b) = (with[0].times(), with[0].values().unwrap(), without[0].values().unwrap());
    for i in 0..t.len() {
        let shift = if t[i] >= 0.5 { 1.0 } else { 0.0 };
        assert!((a[i] - b[i] - shift).abs() < 1e-12);
    }
}

#[test]
fn parametric_estimator_recovers_jump_sizes() {
    let model = ParametricModel::new(4_000, 1.0, 1.0, vec![0.3, 0.7], vec![2.0, -1.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let reps = 200;
    let mut mean = [0.0; 2];
    for _ in 0..reps {
        let g = model.estimate(&model.simulate(&mut rng)).unwrap();
        mean[0] += g[0] / reps as f64;
        mean[1] += g[1] / reps as f64;
    }
    // Per-replication standard deviation is about sqrt(2) * 4000^{-1/4} = 0.18.
    assert!((mean[0] - 2.0).abs() < 0.05 && (mean[1] + 1.0).abs() < 0.05, "{mean:?}");
}
