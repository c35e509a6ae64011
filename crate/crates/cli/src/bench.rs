//! Timing benchmark: cumulative plan+sense time per curtain count, averaged
//! over independent trials with 95% confidence half-widths, plus the
//! entropy-removed side of the speed-accuracy tradeoff.

use serde::{Deserialize, Serialize};

use curtain_core::config::Rig;
use curtain_core::episode::{derive_seed, run_episode, EpisodeConfig};
use curtain_core::planner::Strategy;
use curtain_core::sim::Scene;
use curtain_core::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub strategy: String,
    /// Number of curtains included in the cumulative time.
    pub k: usize,
    pub mean_s: f64,
    /// 95% confidence half-width (normal approximation).
    pub ci95_s: f64,
    pub trials: usize,
    /// Mean cumulative planning time through the k curtains, seconds.
    pub mean_plan_s: f64,
    /// Mean belief entropy removed by the k curtains (relative to the
    /// post-LiDAR belief), bits.
    pub mean_entropy_removed_bits: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub workers: usize,
    pub trials: usize,
    pub k_max: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_csv_string(&self) -> String {
        let mut out =
            String::from("strategy,k,mean_s,ci95_s,trials,mean_plan_s,mean_entropy_removed_bits\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.strategy,
                r.k,
                r.mean_s,
                r.ci95_s,
                r.trials,
                r.mean_plan_s,
                r.mean_entropy_removed_bits
            ));
        }
        out
    }
}

/// Per-trial samples for one strategy, indexed by curtain count 0..=k_max:
/// cumulative step time, cumulative plan time, entropy removed.
type TrialSample = (Vec<f64>, Vec<f64>, Vec<f64>);

/// Run `trials` episodes per strategy (scenes cycled in order, seeds derived
/// per trial) and aggregate cumulative means with confidence half-widths.
/// Trials may be spread over `workers` threads; each trial is timed on its
/// own.
pub fn bench_scenes(
    rig: &Rig,
    scenes: &[Scene],
    strategies: &[Strategy],
    trials: usize,
    k_max: usize,
    seed: u64,
    workers: usize,
) -> Result<BenchReport> {
    let workers = workers.max(1).min(trials);

    let run_trial = |strategy: Strategy, trial: usize| -> Result<TrialSample> {
        let scene = &scenes[trial % scenes.len()];
        let cfg = EpisodeConfig {
            k_max,
            strategy,
            seed: derive_seed(seed, trial as u64),
            ..EpisodeConfig::default()
        };
        let log = run_episode(scene, rig, &cfg)?;
        let base_entropy = log.steps[0].entropy_bits;
        let mut cum_time = 0.0;
        let mut cum_plan = 0.0;
        let mut times = Vec::with_capacity(k_max + 1);
        let mut plans = Vec::with_capacity(k_max + 1);
        let mut removed = Vec::with_capacity(k_max + 1);
        for step in &log.steps {
            cum_time += step.step_time_s;
            cum_plan += step.plan_time_s;
            times.push(cum_time);
            plans.push(cum_plan);
            removed.push(base_entropy - step.entropy_bits);
        }
        Ok((times, plans, removed))
    };

    let mut rows = Vec::new();
    for &strategy in strategies {
        // chunk trial indices over workers; each worker times its own runs
        let results: Vec<Result<TrialSample>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let run_trial = &run_trial;
                handles.push(scope.spawn(move || {
                    (w..trials)
                        .step_by(workers)
                        .map(|trial| run_trial(strategy, trial))
                        .collect::<Vec<_>>()
                }));
            }
            let mut all = Vec::with_capacity(trials);
            for h in handles {
                all.extend(h.join().expect("bench worker panicked"));
            }
            all
        });

        let mut samples: Vec<TrialSample> = Vec::with_capacity(trials);
        for r in results {
            samples.push(r?);
        }
        for k in 0..=k_max {
            let times: Vec<f64> = samples.iter().map(|(t, _, _)| t[k]).collect();
            let plans: Vec<f64> = samples.iter().map(|(_, p, _)| p[k]).collect();
            let removed: Vec<f64> = samples.iter().map(|(_, _, r)| r[k]).collect();
            let (mean_s, ci95_s) = mean_ci95(&times);
            let (mean_plan_s, _) = mean_ci95(&plans);
            let (mean_removed, _) = mean_ci95(&removed);
            rows.push(BenchRow {
                strategy: strategy.to_string(),
                k,
                mean_s,
                ci95_s,
                trials: times.len(),
                mean_plan_s,
                mean_entropy_removed_bits: mean_removed,
            });
        }
    }

    Ok(BenchReport {
        workers,
        trials,
        k_max,
        rows,
    })
}

/// Sample mean and 1.96 * s / sqrt(n) half-width.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}
