//! Observation-time schemes and multi-asset synchronization.
//!
//! Times are `f64` in horizon units. Synchronized times are always copies of
//! original ticks, so two assets share a synchronized time exactly when their
//! ticks coincide bitwise.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-asset observation times with optional observed values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickSchedule {
    pub asset_id: u32,
    times: Vec<f64>,
    values: Option<Vec<f64>>,
}

impl TickSchedule {
    pub fn new(asset_id: u32, times: Vec<f64>) -> Result<Self> {
        check_times(&times)?;
        Ok(TickSchedule {
            asset_id,
            times,
            values: None,
        })
    }

    pub fn with_values(asset_id: u32, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut s = Self::new(asset_id, times)?;
        s.set_values(values)?;
        Ok(s)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn set_values(&mut self, values: Vec<f64>) -> Result<()> {
        if values.len() != self.times.len() {
            return Err(Error::input(format!(
                "asset {}: {} values for {} times",
                self.asset_id,
                values.len(),
                self.times.len()
            )));
        }
        self.values = Some(values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Checks that every tick lies in `[0, horizon]`.
    pub fn check_horizon(&self, horizon: f64) -> Result<()> {
        match self.times.last() {
            Some(&t) if t > horizon => Err(Error::input(format!(
                "asset {}: tick {t} beyond horizon {horizon}",
                self.asset_id
            ))),
            _ => Ok(()),
        }
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(Error::input(format!(
            "tick time {t} is not a finite non-negative number"
        )));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::input(format!(
            "tick times not strictly increasing: {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Refresh-time grid `T_0 < T_1 < ...` of a set of schedules.
///
/// `T_0` is the latest first tick; each later `T_p` is the latest of the
/// per-asset first ticks strictly after `T_{p-1}`. Generation stops when some
/// asset has no later tick inside the horizon.
pub fn refresh_times(schedules: &[TickSchedule], horizon: f64) -> Result<Vec<f64>> {
    if schedules.is_empty() {
        return Err(Error::input("refresh times need at least one schedule"));
    }
    for s in schedules {
        if s.is_empty() {
            return Err(Error::input(format!("asset {} has no ticks", s.asset_id)));
        }
        s.check_horizon(horizon)?;
    }

    let mut cursors = vec![0usize; schedules.len()];
    let mut grid = Vec::new();
    let mut current = schedules.iter().map(|s| s.times[0]).fold(f64::MIN, f64::max);
    loop {
        grid.push(current);
        let mut next = f64::MIN;
        for (s, c) in schedules.iter().zip(cursors.iter_mut()) {
            while *c < s.times.len() && s.times[*c] <= current {
                *c += 1;
            }
            match s.times.get(*c) {
                Some(&t) => next = next.max(t),
                None => return Ok(grid),
            }
        }
        current = next;
    }
}

/// Grid plus per-asset next-tick interpolated times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncGrid {
    pub grid: Vec<f64>,
    /// `per_asset[k][p]` is the synchronized time of asset `k` at grid index `p`.
    pub per_asset: Vec<Vec<f64>>,
    /// Index into the original schedule of each synchronized time.
    pub tick_index: Vec<Vec<usize>>,
    pub horizon: f64,
    /// Set when the grid was cut because some asset ran out of ticks.
    pub truncated: bool,
}

impl SyncGrid {
    pub fn dim(&self) -> usize {
        self.per_asset.len()
    }

    /// `N_T`: index of the last grid point.
    pub fn last_index(&self) -> usize {
        self.grid.len().saturating_sub(1)
    }

    /// Observed values at the synchronized times, one vector per asset.
    pub fn values(&self, schedules: &[TickSchedule]) -> Result<Vec<Vec<f64>>> {
        if schedules.len() != self.dim() {
            return Err(Error::input("schedule count does not match grid dimension"));
        }
        schedules
            .iter()
            .zip(&self.tick_index)
            .map(|(s, idx)| {
                let v = s
                    .values()
                    .ok_or_else(|| Error::input(format!("asset {} carries no values", s.asset_id)))?;
                Ok(idx.iter().map(|&i| v[i]).collect())
            })
            .collect()
    }

    /// Checks `tau_0 <= T_0` and `T_{p-1} < tau_p <= T_p`.
    pub fn satisfies_ordering(&self) -> bool {
        self.per_asset.iter().all(|taus| {
            taus.len() == self.grid.len()
                && taus.first().zip(self.grid.first()).is_none_or(|(t, g)| t <= g)
                && (1..taus.len()).all(|p| self.grid[p - 1] < taus[p] && taus[p] <= self.grid[p])
        })
    }
}

/// Next-tick interpolation of each schedule onto `grid`.
///
/// `tau_0` is the first tick and `tau_p` is the first tick strictly after
/// `T_{p-1}`. When an asset has no such tick the grid is truncated to the
/// last fully covered index and `truncated` is set. A grid for which some
/// next tick lands after `T_p` violates the ordering condition and is rejected.
pub fn next_tick_interpolate(schedules: &[TickSchedule], grid: &[f64]) -> Result<SyncGrid> {
    if schedules.is_empty() {
        return Err(Error::input("interpolation needs at least one schedule"));
    }
    if grid.is_empty() {
        return Err(Error::input("empty grid"));
    }
    check_times(grid)?;

    let d = schedules.len();
    let mut per_asset = vec![Vec::with_capacity(grid.len()); d];
    let mut tick_index = vec![Vec::with_capacity(grid.len()); d];
    for (k, s) in schedules.iter().enumerate() {
        match s.times.first() {
            Some(&t0) if t0 <= grid[0] => {
                per_asset[k].push(t0);
                tick_index[k].push(0);
            }
            Some(&t0) => {
                return Err(Error::input(format!(
                    "asset {}: first tick {t0} after T_0 = {}",
                    s.asset_id, grid[0]
                )))
            }
            None => return Err(Error::input(format!("asset {} has no ticks", s.asset_id))),
        }
    }

    let mut cursors = vec![0usize; d];
    let mut truncated = false;
    let mut covered = 1;
    'grid: for p in 1..grid.len() {
        for (k, s) in schedules.iter().enumerate() {
            let c = &mut cursors[k];
            while *c < s.times.len() && s.times[*c] <= grid[p - 1] {
                *c += 1;
            }
            let Some(&t) = s.times.get(*c) else {
                truncated = true;
                break 'grid;
            };
            if t > grid[p] {
                return Err(Error::input(format!(
                    "asset {}: next tick {t} after T_{p} = {}",
                    s.asset_id, grid[p]
                )));
            }
        }
        for (k, s) in schedules.iter().enumerate() {
            per_asset[k].push(s.times[cursors[k]]);
            tick_index[k].push(cursors[k]);
        }
        covered = p + 1;
    }

    for k in 0..d {
        per_asset[k].truncate(covered);
        tick_index[k].truncate(covered);
    }
    Ok(SyncGrid {
        grid: grid[..covered].to_vec(),
        per_asset,
        tick_index,
        horizon: *grid.last().unwrap_or(&0.0),
        truncated,
    })
}

/// Refresh times followed by next-tick interpolation.
pub fn synchronize(schedules: &[TickSchedule], horizon: f64) -> Result<SyncGrid> {
    let grid = refresh_times(schedules, horizon)?;
    let mut sync = next_tick_interpolate(schedules, &grid)?;
    sync.horizon = horizon;
    Ok(sync)
}

/// Equidistant times `i/n * horizon`, `i = 0..=n`.
pub fn sample_equidistant(n: usize, horizon: f64) -> Result<TickSchedule> {
    if n == 0 {
        return Err(Error::input("equidistant sampling needs n >= 1"));
    }
    let times = (0..=n).map(|i| i as f64 / n as f64 * horizon).collect();
    TickSchedule::new(1, times)
}

/// Independent Poisson arrival times with rates `n * p_k` on `(0, horizon]`.
pub fn sample_poisson<R: Rng + ?Sized>(
    intensities: &[f64],
    n: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<TickSchedule>> {
    if n == 0 {
        return Err(Error::input("poisson sampling needs n >= 1"));
    }
    if intensities.is_empty() {
        return Err(Error::input("poisson sampling needs at least one intensity"));
    }
    intensities
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::input(format!("intensity {p} must be positive")));
            }
            let gap = Exp::new(n as f64 * p).map_err(|e| Error::input(e.to_string()))?;
            let mut times = Vec::with_capacity((n as f64 * p * horizon * 1.1) as usize + 8);
            let mut t = gap.sample(rng);
            while t <= horizon {
                times.push(t);
                t += gap.sample(rng);
            }
            TickSchedule::new(k as u32 + 1, times)
        })
        .collect()
}

/// Limit `G` of the scaled refresh duration for independent Poisson schemes
/// (inclusion-exclusion over subsets of assets).
pub fn poisson_g_limit(intensities: &[f64]) -> Result<f64> {
    let d = intensities.len();
    if d == 0 {
        return Err(Error::input("G limit needs at least one intensity"));
    }
    if d > 24 {
        return Err(Error::input("G limit enumerates subsets; at most 24 assets"));
    }
    if let Some(p) = intensities.iter().find(|p| !(**p > 0.0)) {
        return Err(Error::input(format!("intensity {p} must be positive")));
    }
    let mut g = 0.0;
    for mask in 1u32..(1 << d) {
        let rate: f64 = (0..d).filter(|i| mask & (1 << i) != 0).map(|i| intensities[i]).sum();
        let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        g += sign / rate;
    }
    Ok(g)
}

/// A martingale path on a uniform fine grid starting at time 0.
#[derive(Debug, Clone, Copy)]
pub struct FinePath<'a> {
    pub step: f64,
    pub values: &'a [f64],
    /// Spot variance per fine step; enables the Brownian-bridge crossing check.
    pub spot_variance: Option<&'a [f64]>,
}

/// Output of the hitting-barrier scheme.
#[derive(Debug, Clone)]
pub struct HittingTimes {
    pub schedule: TickSchedule,
    /// `-1` for a down hit, `+1` for an up hit, one per tick after the first.
    pub signs: Vec<i8>,
    /// Fewer than ten fine steps per generated duration on average.
    pub coarse_warning: bool,
}

/// Stopping times generated by the martingale leaving the band
/// `(-alpha/sqrt(n), beta/sqrt(n))` around its value at the previous tick.
///
/// The fine grid is scanned step by step. With a spot variance attached and an
/// rng supplied, each step additionally tests for an excursion through a
/// barrier between grid points using the Brownian-bridge crossing probability
/// `exp(-2 (b - x0)(b - x1) / (var * h))`; this removes the discrete-monitoring
/// overshoot that otherwise inflates durations by roughly `0.58 sigma sqrt(h)`
/// per barrier. A hit is recorded at the end of the fine step in which it
/// occurs and the next band is centered on the path value there.
pub fn sample_hitting_barriers<R: Rng + ?Sized>(
    alpha: f64,
    beta: f64,
    n: usize,
    path: FinePath<'_>,
    horizon: f64,
    mut rng: Option<&mut R>,
) -> Result<HittingTimes> {
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::input("barrier distances must be positive"));
    }
    if n == 0 || path.values.len() < 2 || !(path.step > 0.0) {
        return Err(Error::input("hitting scheme needs n >= 1 and a non-trivial fine path"));
    }
    if let Some(v) = path.spot_variance {
        if v.len() + 1 < path.values.len() {
            return Err(Error::input("spot variance shorter than the fine path"));
        }
    }
    let sqrt_n = (n as f64).sqrt();
    let down = alpha / sqrt_n;
    let up = beta / sqrt_n;

    let last = ((horizon / path.step + 1e-9).floor() as usize).min(path.values.len() - 1);
    let mut times = vec![0.0];
    let mut signs = Vec::new();
    let mut anchor = path.values[0];
    for j in 0..last {
        let x0 = path.values[j] - anchor;
        let x1 = path.values[j + 1] - anchor;
        let mut hit = if x1 <= -down {
            Some(-1)
        } else if x1 >= up {
            Some(1)
        } else {
            None
        };
        if hit.is_none() {
            if let (Some(var), Some(rng)) = (path.spot_variance, rng.as_deref_mut()) {
                let s2h = var[j] * path.step;
                if s2h > 0.0 {
                    // Skip the exponentials when both barriers are > 6 sd away.
                    let reach = 6.0 * s2h.sqrt();
                    let p_up = if up - x0.max(x1) < reach {
                        (-2.0 * (up - x0) * (up - x1) / s2h).exp()
                    } else {
                        0.0
                    };
                    let p_down = if x0.min(x1) + down < reach {
                        (-2.0 * (x0 + down) * (x1 + down) / s2h).exp()
                    } else {
                        0.0
                    };
                    if p_up + p_down > 0.0 {
                        let u: f64 = rng.gen();
                        if u < p_up {
                            hit = Some(1);
                        } else if u < p_up + p_down {
                            hit = Some(-1);
                        }
                    }
                }
            }
        }
        if let Some(sign) = hit {
            times.push((j + 1) as f64 * path.step);
            signs.push(sign);
            anchor = path.values[j + 1];
        }
    }

    let durations = (times.len() - 1).max(1) as f64;
    let coarse_warning = (last as f64) / durations < 10.0;
    Ok(HittingTimes {
        schedule: TickSchedule::new(1, times)?,
        signs,
        coarse_warning,
    })
}

/// Counting and duration functionals of a grid up to time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationStats {
    pub n: usize,
    /// `N_t = max{p : T_p <= t}`, zero before `T_0`.
    pub count: usize,
    /// `r_n(t) = sup_p (T_p ^ t - T_{p-1} ^ t)` with `T_{-1} = 0`.
    pub max_duration: f64,
    /// Mean of `n (T_p - T_{p-1})` over `1 <= p <= N_t`.
    pub mean_scaled_duration: f64,
}

pub fn duration_stats(grid: &[f64], n: usize, t: f64) -> DurationStats {
    let count = grid_count(grid, t);
    let mut prev: f64 = 0.0;
    let mut max_duration: f64 = 0.0;
    for &tp in grid {
        let cur = tp.min(t);
        max_duration = max_duration.max(cur - prev.min(t));
        prev = tp;
        if tp >= t {
            break;
        }
    }
    let mean_scaled_duration = if count > 0 {
        n as f64 * (grid[count] - grid[0]) / count as f64
    } else {
        0.0
    };
    DurationStats {
        n,
        count,
        max_duration,
        mean_scaled_duration,
    }
}

/// `max{p : T_p <= t}`, or zero when `t < T_0`.
pub fn grid_count(grid: &[f64], t: f64) -> usize {
    grid.partition_point(|&tp| tp <= t).saturating_sub(1)
}

/// Long-run variation of time
/// `S_{n,m}(t) = (n/m) sum_{p=1}^{N_t} (T_p - T_{p-1}) sum_{q=1}^{m ^ p} (T_{p-q+1} - T_{p-q})`.
pub fn long_run_variation(grid: &[f64], n: usize, m: usize, t: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::input("long-run variation needs m >= 1"));
    }
    let count = grid_count(grid, t);
    let mut total = 0.0;
    for p in 1..=count {
        let lag = m.min(p);
        // inner sum telescopes to T_p - T_{p-lag}
        total += (grid[p] - grid[p - 1]) * (grid[p] - grid[p - lag]);
    }
    Ok(n as f64 / m as f64 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sched(id: u32, t: &[f64]) -> TickSchedule {
        TickSchedule::new(id, t.to_vec()).unwrap()
    }

    #[test]
    fn refresh_times_examples() {
        let a = sched(1, &[1.0, 3.0, 5.0]);
        let b = sched(2, &[2.0, 4.0, 6.0]);
        assert_eq!(
            refresh_times(&[a.clone(), b.clone()], 10.0).unwrap(),
            vec![2.0, 4.0, 6.0]
        );
        let single = sched(1, &[0.1, 0.2, 0.3]);
        assert_eq!(refresh_times(&[single], 1.0).unwrap(), vec![0.1, 0.2, 0.3]);
        let s = sched(1, &[1.0, 2.0, 3.0]);
        assert_eq!(refresh_times(&[s.clone(), s], 3.0).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn refresh_times_errors() {
        assert!(matches!(refresh_times(&[], 1.0), Err(Error::InvalidInput(_))));
        let empty = sched(1, &[]);
        assert!(refresh_times(&[empty], 1.0).is_err());
        let late = sched(1, &[0.5, 2.0]);
        assert!(refresh_times(&[late], 1.0).is_err());
    }

    #[test]
    fn schedule_rejects_unsorted() {
        assert!(TickSchedule::new(1, vec![0.1, 0.1]).is_err());
        assert!(TickSchedule::new(1, vec![-0.1]).is_err());
        assert!(TickSchedule::with_values(1, vec![0.1, 0.2], vec![1.0]).is_err());
    }

    #[test]
    fn next_tick_examples() {
        let a = sched(1, &[1.0, 3.0, 5.0]);
        let b = sched(2, &[2.0, 4.0, 6.0]);
        let sync = next_tick_interpolate(&[a, b], &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(sync.per_asset[0], vec![1.0, 3.0, 5.0]);
        assert_eq!(sync.per_asset[1], vec![2.0, 4.0, 6.0]);
        assert!(sync.satisfies_ordering());
        assert!(!sync.truncated);

        let s = sched(1, &[0.0, 0.5, 1.0]);
        let sync = synchronize(&[s.clone(), s.clone()], 1.0).unwrap();
        assert_eq!(sync.per_asset[0], sync.grid);
        assert_eq!(sync.per_asset[1], sync.grid);
        let sync = synchronize(&[s], 1.0).unwrap();
        assert_eq!(sync.per_asset[0], sync.grid);
    }

    #[test]
    fn next_tick_truncates_when_ticks_run_out() {
        let a = sched(1, &[1.0, 3.0]);
        let b = sched(2, &[2.0, 4.0, 6.0]);
        let sync = next_tick_interpolate(&[a, b], &[2.0, 4.0, 6.0]).unwrap();
        assert!(sync.truncated);
        assert_eq!(sync.grid, vec![2.0, 4.0]);
        assert_eq!(sync.per_asset[0], vec![1.0, 3.0]);
    }

    #[test]
    fn next_tick_rejects_grid_violating_ordering() {
        let a = sched(1, &[1.0, 5.0]);
        assert!(next_tick_interpolate(&[a], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn equidistant_examples() {
        assert_eq!(
            sample_equidistant(4, 1.0).unwrap().times(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        assert_eq!(sample_equidistant(1, 1.0).unwrap().times(), &[0.0, 1.0]);
        assert_eq!(sample_equidistant(2, 2.0).unwrap().times(), &[0.0, 1.0, 2.0]);
        assert!(sample_equidistant(0, 1.0).is_err());
    }

    #[test]
    fn g_limit_examples() {
        assert!((poisson_g_limit(&[2.0]).unwrap() - 0.5).abs() < 1e-15);
        assert!((poisson_g_limit(&[3.0, 3.0]).unwrap() - 1.5 / 3.0).abs() < 1e-15);
        let (p1, p2) = (1.0, 2.5);
        let expected = 1.0 / p1 + 1.0 / p2 - 1.0 / (p1 + p2);
        assert!((poisson_g_limit(&[p1, p2]).unwrap() - expected).abs() < 1e-15);
        assert!(poisson_g_limit(&[]).is_err());
        assert!(poisson_g_limit(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn g_limit_matches_coupon_collector_for_equal_rates() {
        // equal rates p: G = (1/p) * H_d (harmonic number)
        for d in 1..=6 {
            let h: f64 = (1..=d).map(|i| 1.0 / i as f64).sum();
            let g = poisson_g_limit(&vec![2.0; d]).unwrap();
            assert!((g - h / 2.0).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn poisson_gap_mean_and_reproducibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // ~10^5 gaps at rate 2000 needs horizon 50
        let s = sample_poisson(&[2.0], 1000, 50.0, &mut rng).unwrap();
        let t = s[0].times();
        let gaps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let se = (1.0 / 2000.0) / (gaps.len() as f64).sqrt();
        assert!((mean - 1.0 / 2000.0).abs() < 3.0 * se, "mean {mean}");

        let a = sample_poisson(&[1.0], 100, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_poisson(&[1.0], 100, 1.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn poisson_assets_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample_poisson(&[1.0, 1.0], 2000, 50.0, &mut rng).unwrap();
        let bins = 5000;
        let counts = |sch: &TickSchedule| {
            let mut c = vec![0.0; bins];
            for &t in sch.times() {
                c[((t / 50.0 * bins as f64) as usize).min(bins - 1)] += 1.0;
            }
            c
        };
        let (a, b) = (counts(&s[0]), counts(&s[1]));
        let corr = crate::stats::correlation(&a, &b);
        assert!(corr.abs() < 3.0 / (bins as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn duration_stats_examples() {
        let eq = sample_equidistant(4, 1.0).unwrap();
        let st = duration_stats(eq.times(), 4, 1.0);
        assert_eq!(st.count, 4);
        assert!((st.max_duration - 0.25).abs() < 1e-15);
        assert!((st.mean_scaled_duration - 1.0).abs() < 1e-12);

        let st = duration_stats(&[2.0, 4.0, 6.0], 1, 5.0);
        assert_eq!(st.count, 1);
        assert_eq!(st.max_duration, 2.0);

        let st = duration_stats(&[2.0, 4.0, 6.0], 1, 1.0);
        assert_eq!(st.count, 0);
    }

    #[test]
    fn long_run_variation_equidistant() {
        let g = sample_equidistant(100, 1.0).unwrap();
        let s = long_run_variation(g.times(), 100, 10, 1.0).unwrap();
        assert!((s - 1.0).abs() <= 0.1);
        // closed form 1 - (m-1)/(2n)
        assert!((s - (1.0 - 9.0 / 200.0)).abs() < 1e-12);
        assert!(long_run_variation(g.times(), 100, 0, 1.0).is_err());
    }

    #[test]
    fn hitting_barrier_symmetric_probability_and_g() {
        let n = 10_000usize;
        let steps = 2_000_000usize;
        let horizon = 1.0;
        let h = horizon / steps as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = rand_distr::StandardNormal;
        let mut m = Vec::with_capacity(steps + 1);
        let mut x = 0.0;
        m.push(x);
        for _ in 0..steps {
            let z: f64 = normal.sample(&mut rng);
            x += h.sqrt() * z;
            m.push(x);
        }
        let var = vec![1.0; steps];
        let path = FinePath {
            step: h,
            values: &m,
            spot_variance: Some(&var),
        };
        let hits = sample_hitting_barriers(1.0, 1.0, n, path, horizon, Some(&mut rng)).unwrap();
        assert!(!hits.coarse_warning);
        let k = hits.signs.len() as f64;
        let down = hits.signs.iter().filter(|s| **s < 0).count() as f64 / k;
        assert!((down - 0.5).abs() < 3.0 * (0.25 / k).sqrt(), "down fraction {down}");
        let st = duration_stats(hits.schedule.times(), n, horizon);
        assert!(
            (st.mean_scaled_duration - 1.0).abs() < 0.03,
            "G {}",
            st.mean_scaled_duration
        );
    }

    #[test]
    fn one_sided_barrier_limit() {
        let steps = 200_000usize;
        let h = 1.0 / steps as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = vec![0.0];
        for _ in 0..steps {
            let z: f64 = rand_distr::StandardNormal.sample(&mut rng);
            m.push(m.last().unwrap() + h.sqrt() * z);
        }
        let path = FinePath {
            step: h,
            values: &m,
            spot_variance: None,
        };
        let hits = sample_hitting_barriers::<ChaCha8Rng>(1.0, 1000.0, 1000, path, 1.0, None).unwrap();
        let down = hits.signs.iter().filter(|s| **s < 0).count();
        assert!(down + 1 >= hits.signs.len());
        assert!(!hits.signs.is_empty());
    }

    #[test]
    fn hitting_barrier_warns_on_coarse_path() {
        let m: Vec<f64> = (0..=100).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let path = FinePath {
            step: 0.01,
            values: &m,
            spot_variance: None,
        };
        let hits = sample_hitting_barriers::<ChaCha8Rng>(1.0, 1.0, 100, path, 1.0, None).unwrap();
        assert!(hits.coarse_warning);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn schedule_strategy() -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(0.0f64..1.0, 1..60).prop_map(|mut v| {
                v.sort_by(f64::total_cmp);
                v.dedup();
                v
            })
        }

        proptest! {
            #[test]
            fn refresh_grid_satisfies_ordering(
                raw in prop::collection::vec(schedule_strategy(), 1..4)
            ) {
                let schedules: Vec<_> = raw
                    .into_iter()
                    .enumerate()
                    .map(|(k, t)| TickSchedule::new(k as u32 + 1, t).unwrap())
                    .collect();
                let grid = refresh_times(&schedules, 1.0).unwrap();
                prop_assert!(grid.windows(2).all(|w| w[1] > w[0]));
                let sync = next_tick_interpolate(&schedules, &grid).unwrap();
                prop_assert!(!sync.truncated);
                prop_assert_eq!(sync.grid.len(), grid.len());
                prop_assert!(sync.satisfies_ordering());
                for (s, taus) in schedules.iter().zip(&sync.per_asset) {
                    prop_assert!(taus.iter().all(|t| s.times().contains(t)));
                }
            }
        }
    }
}
