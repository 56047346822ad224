//! Trajectories, window averages and disorder ensembles.

use std::io::Write;

use rayon::prelude::*;

use crate::engine::{CycleOutcome, ModelTemplate, Period};
use crate::error::{invalid, Error, Result};
use crate::rng::replica_seed;

/// Impaired-firm counts per tick, starting at tick 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    nodes: usize,
    resolution: u32,
    theta: Vec<u32>,
    cycle: Option<CycleOutcome>,
}

impl TrajectoryRecord {
    pub fn new(nodes: usize, resolution: u32, theta: Vec<u32>) -> Self {
        debug_assert!(theta.iter().all(|&t| t as usize <= nodes));
        TrajectoryRecord {
            nodes,
            resolution,
            theta,
            cycle: None,
        }
    }

    pub fn with_cycle(mut self, cycle: CycleOutcome) -> Self {
        self.cycle = Some(cycle);
        self
    }

    pub fn cycle(&self) -> Option<&CycleOutcome> {
        self.cycle.as_ref()
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn theta(&self) -> &[u32] {
        &self.theta
    }

    pub fn rho_at(&self, tick: usize) -> f64 {
        1.0 - self.theta[tick] as f64 / self.nodes as f64
    }

    pub fn rho(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.rho_at(k)).collect()
    }

    pub fn t_days(&self, tick: usize) -> f64 {
        tick as f64 / self.resolution as f64
    }

    /// CSV with columns `t_days,theta_tot,rho`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_days,theta_tot,rho")?;
        for k in 0..self.len() {
            writeln!(out, "{},{},{}", self.t_days(k), self.theta[k], self.rho_at(k))?;
        }
        Ok(())
    }
}

fn window_ticks(resolution: u32, tau_days: f64) -> Result<usize> {
    let ticks = tau_days * resolution as f64;
    if !(ticks >= 1.0) || (ticks - ticks.round()).abs() > 1e-9 {
        return Err(invalid(
            "tau",
            format!("averaging window of {tau_days} days is not a positive whole number of ticks"),
        ));
    }
    Ok(ticks.round() as usize)
}

fn sliding_mean(values: &[f64], width: usize) -> Vec<f64> {
    values
        .windows(width)
        .map(|w| w.iter().sum::<f64>() / width as f64)
        .collect()
}

/// `ρ_av(t)`: mean of `ρ` over `[t, t + τ)` for every `t` whose window fits
/// inside the trajectory.
pub fn window_average_density(traj: &TrajectoryRecord, tau_days: f64) -> Result<Vec<f64>> {
    let width = window_ticks(traj.resolution, tau_days)?;
    if width > traj.len() {
        return Err(Error::TruncatedWindow {
            window: width,
            len: traj.len(),
        });
    }
    Ok(sliding_mean(&traj.rho(), width))
}

/// Options for [`ensemble_average`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EnsembleOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Detect transient and period per replica, searching this many ticks.
    pub detection_horizon: Option<u64>,
}

/// Runs `f(replica, replica_seed)` for every replica and returns the results
/// in replica order, whatever order the workers finish in.
pub fn map_replicas<T, F>(replicas: usize, seed: u64, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let job = || {
        (0..replicas)
            .into_par_iter()
            .map(|k| f(k, replica_seed(seed, k as u64)))
            .collect::<Result<Vec<T>>>()
    };
    match workers {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    }
}

/// Disorder averages over `replicas` runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub replicas: usize,
    pub nodes: usize,
    pub resolution: u32,
    pub mean_theta: Vec<f64>,
    pub se_theta: Vec<f64>,
    pub mean_rho: Vec<f64>,
    pub se_rho: Vec<f64>,
    /// Per-replica cycle detection results, when requested.
    pub cycles: Vec<Option<CycleOutcome>>,
}

/// Exact per-tick sums over replicas. Integer accumulation makes the result
/// independent of the order in which replicas are folded in.
#[derive(Debug, Clone, Default)]
struct Accumulator {
    count: u64,
    sum: Vec<u64>,
    sum_sq: Vec<u128>,
}

impl Accumulator {
    fn add(&mut self, theta: &[u32]) {
        if self.sum.is_empty() {
            self.sum = vec![0; theta.len()];
            self.sum_sq = vec![0; theta.len()];
        }
        for (k, &t) in theta.iter().enumerate() {
            self.sum[k] += t as u64;
            self.sum_sq[k] += (t as u128) * (t as u128);
        }
        self.count += 1;
    }

    fn mean_and_se(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.count as f64;
        let mean = self.sum.iter().map(|&s| s as f64 / n).collect();
        let se = self
            .sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(&s, &q)| {
                if self.count < 2 {
                    return f64::NAN;
                }
                // n Σθ² − (Σθ)² is exact in integers
                let centered = self.count as u128 * q - (s as u128) * (s as u128);
                let var = centered as f64 / (n * (n - 1.0));
                (var / n).sqrt()
            })
            .collect();
        (mean, se)
    }
}

/// Replicas processed per parallel batch; bounds memory for long horizons.
const BATCH: usize = 64;

/// Runs `replicas` independent draws of `template` and averages their
/// trajectories. Replica `k` uses streams derived from
/// `replica_seed(seed, k)`.
pub fn ensemble_average(
    template: &ModelTemplate,
    replicas: usize,
    seed: u64,
    options: EnsembleOptions,
) -> Result<EnsembleStats> {
    if replicas == 0 {
        return Err(invalid("N_s", "at least one replica is required"));
    }
    let one = |_: usize, s: u64| -> Result<(Vec<u32>, Option<CycleOutcome>)> {
        let model = template.instantiate(s)?.compile()?;
        let record = crate::engine::run_compiled(&model);
        let cycle = options.detection_horizon.map(|h| model.detect_cycle(h));
        Ok((record.theta().to_vec(), cycle))
    };

    let mut acc = Accumulator::default();
    let mut cycles = Vec::with_capacity(replicas);
    if !template.is_random() {
        // every replica is the same system
        let (theta, cycle) = one(0, replica_seed(seed, 0))?;
        for _ in 0..replicas {
            acc.add(&theta);
            cycles.push(cycle);
        }
    } else {
        let mut start = 0;
        while start < replicas {
            let end = (start + BATCH).min(replicas);
            let batch = map_replicas(end - start, 0, options.workers, |k, _| {
                let r = start + k;
                one(r, replica_seed(seed, r as u64))
            })?;
            for (theta, cycle) in batch {
                acc.add(&theta);
                cycles.push(cycle);
            }
            start = end;
        }
    }

    let (mean_theta, se_theta) = acc.mean_and_se();
    let nodes = template.nodes;
    let mean_rho = mean_theta.iter().map(|&t| 1.0 - t / nodes as f64).collect();
    let se_rho = se_theta.iter().map(|&s| s / nodes as f64).collect();
    Ok(EnsembleStats {
        replicas,
        nodes,
        resolution: template.grid.resolution(),
        mean_theta,
        se_theta,
        mean_rho,
        se_rho,
        cycles,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => x.to_string(),
        _ => "NA".to_string(),
    }
}

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.mean_theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_theta.is_empty()
    }

    pub fn t_days(&self, tick: usize) -> f64 {
        tick as f64 / self.resolution as f64
    }

    /// Tick index of day `t`.
    pub fn tick_of(&self, days: f64) -> usize {
        (days * self.resolution as f64).round() as usize
    }

    pub fn exhausted_count(&self) -> usize {
        self.cycles
            .iter()
            .filter(|c| matches!(c, Some(CycleOutcome::Exhausted { .. })))
            .count()
    }

    pub fn transients_days(&self) -> Vec<f64> {
        self.found().map(|c| c.transient_days()).collect()
    }

    /// Periods in days; fixed points count as 0.
    pub fn periods_days(&self) -> Vec<f64> {
        self.found()
            .map(|c| match c.period() {
                Period::Constant => 0.0,
                Period::Days(d) => d,
            })
            .collect()
    }

    pub fn rho_infs(&self) -> Vec<f64> {
        self.found().map(|c| c.rho_inf).collect()
    }

    fn found(&self) -> impl Iterator<Item = &crate::engine::CycleInfo> {
        self.cycles.iter().filter_map(|c| c.as_ref().and_then(|c| c.found()))
    }

    /// CSV with columns `t_days,mean_rho,stderr_rho,mean_theta,stderr_theta`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t_days,mean_rho,stderr_rho,mean_theta,stderr_theta")?;
        for k in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{}",
                self.t_days(k),
                self.mean_rho[k],
                fmt_opt(Some(self.se_rho[k])),
                self.mean_theta[k],
                fmt_opt(Some(self.se_theta[k]))
            )?;
        }
        Ok(())
    }

    /// CSV with columns `replica,T_trans_days,period_days,rho_inf`; missing
    /// or exhausted detections are written as `NA`, fixed points as period 0.
    pub fn write_distribution_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "replica,T_trans_days,period_days,rho_inf")?;
        for (k, c) in self.cycles.iter().enumerate() {
            let info = c.as_ref().and_then(|c| c.found());
            let period = info.map(|i| match i.period() {
                Period::Constant => 0.0,
                Period::Days(d) => d,
            });
            writeln!(
                out,
                "{k},{},{},{}",
                fmt_opt(info.map(|i| i.transient_days())),
                fmt_opt(period),
                fmt_opt(info.map(|i| i.rho_inf))
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `count / (total · width)`, with `total` counting every input value.
    pub density: f64,
}

/// Histogram with logarithmically spaced edges, `bins_per_decade` per factor
/// of ten. Non-positive and non-finite values are left out of the bins but
/// counted in the normalization.
pub fn log_binned_histogram(values: &[f64], bins_per_decade: usize) -> Vec<HistogramBin> {
    let positive: Vec<f64> = values.iter().copied().filter(|v| v.is_finite() && *v > 0.0).collect();
    if positive.is_empty() || bins_per_decade == 0 {
        return Vec::new();
    }
    let step = 1.0 / bins_per_decade as f64;
    let index = |v: f64| (v.log10() / step).floor() as i64;
    let lo_idx = positive.iter().map(|&v| index(v)).min().unwrap();
    let hi_idx = positive.iter().map(|&v| index(v)).max().unwrap();
    let mut counts = vec![0usize; (hi_idx - lo_idx + 1) as usize];
    for &v in &positive {
        counts[(index(v) - lo_idx) as usize] += 1;
    }
    let total = values.len() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let e = (lo_idx + k as i64) as f64 * step;
            let (lo, hi) = (10f64.powf(e), 10f64.powf(e + step));
            HistogramBin {
                lo,
                hi,
                count,
                density: count as f64 / (total * (hi - lo)),
            }
        })
        .collect()
}

pub fn write_histogram_csv<W: Write>(bins: &[HistogramBin], mut out: W) -> Result<()> {
    writeln!(out, "bin_lo,bin_hi,count,density")?;
    for b in bins {
        writeln!(out, "{},{},{},{}", b.lo, b.hi, b.count, b.density)?;
    }
    Ok(())
}

/// Comparison of a damage duration `τ_c` against the `τ_c = 1` ensemble
/// rescaled by `τ_c / N`, both averaged over the same time window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingCheck {
    pub t_days: Vec<f64>,
    /// Measured `⟨ρ_av⟩` minus `1 − (τ_c/N)⟨θ_av(τ_c = 1)⟩`.
    pub residual: Vec<f64>,
    /// Combined standard error of the two window-averaged series.
    pub combined_se: Vec<f64>,
}

impl ScalingCheck {
    pub fn max_abs_residual(&self) -> f64 {
        self.residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

pub fn scaling_check_tau_c(
    at_tau_c: &EnsembleStats,
    at_unit: &EnsembleStats,
    tau_c: f64,
    window_days: f64,
) -> Result<ScalingCheck> {
    if at_tau_c.resolution != at_unit.resolution || at_tau_c.nodes != at_unit.nodes || at_tau_c.len() != at_unit.len() {
        return Err(Error::Mismatch("ensembles differ in grid, size or length".into()));
    }
    let width = window_ticks(at_tau_c.resolution, window_days)?;
    if width > at_tau_c.len() {
        return Err(Error::TruncatedWindow {
            window: width,
            len: at_tau_c.len(),
        });
    }
    let scale = tau_c / at_tau_c.nodes as f64;
    let measured = sliding_mean(&at_tau_c.mean_rho, width);
    let theta_unit = sliding_mean(&at_unit.mean_theta, width);
    let se_a = sliding_mean(&at_tau_c.se_rho, width);
    let se_b = sliding_mean(&at_unit.se_theta, width);
    let residual = measured
        .iter()
        .zip(&theta_unit)
        .map(|(m, t)| m - (1.0 - scale * t))
        .collect();
    let combined_se = se_a
        .iter()
        .zip(&se_b)
        .map(|(a, b)| (a * a + (scale * b).powi(2)).sqrt())
        .collect();
    Ok(ScalingCheck {
        t_days: (0..measured.len()).map(|k| at_tau_c.t_days(k)).collect(),
        residual,
        combined_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delays::DelayMode;
    use crate::engine::{ForcingSchedule, TopologySpec, Variant};
    use crate::time::TimeGrid;

    fn chain_template(n: usize, nodes: usize, mode: DelayMode, tau_c: f64, horizon: u64) -> ModelTemplate {
        ModelTemplate {
            variant: Variant::Free,
            nodes,
            topology: TopologySpec::Braid { in_degree: n },
            delay_mode: mode,
            tau_min: 1.0,
            tau_max: 10.0,
            forcing: ForcingSchedule::new(0, tau_c),
            grid: TimeGrid::new(1).unwrap(),
            horizon,
        }
    }

    #[test]
    fn constant_density_window_average() {
        let traj = TrajectoryRecord::new(10, 2, vec![1; 40]);
        let avg = window_average_density(&traj, 3.0).unwrap();
        assert_eq!(avg.len(), 35);
        assert!(avg.iter().all(|&v| (v - 0.9).abs() < 1e-15));
        assert!(matches!(
            window_average_density(&traj, 30.0),
            Err(Error::TruncatedWindow { window: 60, len: 40 })
        ));
        assert!(window_average_density(&traj, 0.25).is_err());
    }

    #[test]
    fn square_wave_window_average() {
        // one firm out of one, down on every other half day
        let theta: Vec<u32> = (0..20).map(|k| (k % 2) as u32).collect();
        let traj = TrajectoryRecord::new(1, 2, theta);
        let avg = window_average_density(&traj, 1.0).unwrap();
        assert!(avg.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn half_day_damage_on_single_chain() {
        let mut t = chain_template(1, 10, DelayMode::Constant, 0.5, 200);
        t.grid = TimeGrid::new(2).unwrap();
        let spec = t.instantiate(0).unwrap();
        let traj = crate::engine::brute_force_reference(&spec).unwrap();
        let avg = window_average_density(&traj, 1.0).unwrap();
        assert!(avg.iter().all(|&v| (v - (1.0 - 0.5 / 10.0)).abs() < 1e-12));
    }

    #[test]
    fn deterministic_ensemble_has_zero_variance() {
        let t = chain_template(2, 10, DelayMode::Constant, 1.0, 30);
        let s = ensemble_average(&t, 5, 1, EnsembleOptions::default()).unwrap();
        assert!(s.se_theta.iter().all(|&e| e == 0.0));
        assert_eq!(s.mean_theta[3], 4.0);
    }

    #[test]
    fn ensemble_is_independent_of_worker_count() {
        let t = chain_template(1, 20, DelayMode::PerEdge, 1.0, 300);
        let opts = |w| EnsembleOptions {
            workers: Some(w),
            detection_horizon: Some(100_000),
        };
        let a = ensemble_average(&t, 70, 9, opts(1)).unwrap();
        let b = ensemble_average(&t, 70, 9, opts(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.mean_rho.iter().all(|&r| (0.0..=1.0).contains(&r)));
        assert!(a.se_rho.iter().all(|&e| e >= 0.0));
        assert_eq!(a.periods_days().len(), 70);
    }

    #[test]
    fn single_chain_mean_period() {
        // ⟨π⟩ = N (τ_max + 1) / 2 for the single chain with random delays
        let t = chain_template(1, 30, DelayMode::PerEdge, 1.0, 10);
        let s = ensemble_average(
            &t,
            2000,
            4,
            EnsembleOptions {
                workers: None,
                detection_horizon: Some(10_000),
            },
        )
        .unwrap();
        let p = s.periods_days();
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (p.len() - 1) as f64;
        let se = (var / p.len() as f64).sqrt();
        assert!((mean - 165.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn csv_layouts() {
        let t = chain_template(1, 10, DelayMode::Constant, 1.0, 12);
        let s = ensemble_average(
            &t,
            2,
            0,
            EnsembleOptions {
                workers: Some(1),
                detection_horizon: Some(5),
            },
        )
        .unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_days,mean_rho,stderr_rho,mean_theta,stderr_theta\n0,0.9,0,1,0\n"));
        let mut buf = Vec::new();
        s.write_distribution_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "replica,T_trans_days,period_days,rho_inf\n0,NA,NA,NA\n1,NA,NA,NA\n"
        );
        let traj = TrajectoryRecord::new(4, 2, vec![0, 1, 4]);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t_days,theta_tot,rho\n0,0,1\n0.5,1,0.75\n1,4,0\n"
        );
    }

    #[test]
    fn log_bins_cover_all_positive_values() {
        let values = [1.0, 2.0, 5.0, 10.0, 20.0, 99.0, 0.0, f64::NAN];
        let bins = log_binned_histogram(&values, 2);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 6);
        assert!((bins[0].lo - 1.0).abs() < 1e-12);
        for w in bins.windows(2) {
            assert!((w[0].hi - w[1].lo).abs() < 1e-9);
        }
        assert!(log_binned_histogram(&[], 3).is_empty());
    }

    #[test]
    fn scaling_check_trivial_cases() {
        let t1 = chain_template(1, 30, DelayMode::PerEdge, 1.0, 200);
        let s1 = ensemble_average(&t1, 20, 3, EnsembleOptions::default()).unwrap();
        let same = scaling_check_tau_c(&s1, &s1, 1.0, 10.0).unwrap();
        assert!(same.max_abs_residual() < 1e-12);
        let t0 = chain_template(1, 30, DelayMode::PerEdge, 0.0, 200);
        let s0 = ensemble_average(&t0, 20, 3, EnsembleOptions::default()).unwrap();
        assert!(s0.mean_rho.iter().all(|&r| r == 1.0));
        assert!(scaling_check_tau_c(&s0, &s1, 0.0, 10.0).unwrap().max_abs_residual() < 1e-12);
        let mut other = s1.clone();
        other.resolution = 2;
        assert!(scaling_check_tau_c(&other, &s1, 1.0, 10.0).is_err());
    }
}
