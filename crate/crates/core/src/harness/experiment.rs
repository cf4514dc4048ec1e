//! Monte Carlo experiment runner: independent seeded trials (optionally in
//! parallel), order-insensitive aggregation, and the coverage/length/
//! normality summaries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, TrialError};
use crate::model::GroundTruth;

use super::config::ExperimentConfig;
use super::rng::truth_rng;
use super::trial::{run_trial, TrialResult};

/// Version tag for exported files.
pub const SCHEMA_VERSION: u32 = 1;

/// Histogram bounds and bin count for standardized statistics. Values
/// outside the range are clamped into the edge bins so counts always sum to
/// the number of trials.
pub const HIST_LO: f64 = -4.0;
pub const HIST_HI: f64 = 4.0;
pub const HIST_BINS: usize = 61;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    fn from_values(values: &[f64]) -> Self {
        let mut counts = vec![0u64; HIST_BINS];
        let width = (HIST_HI - HIST_LO) / HIST_BINS as f64;
        for &v in values {
            let idx = ((v - HIST_LO) / width).floor() as isize;
            let idx = idx.clamp(0, HIST_BINS as isize - 1) as usize;
            counts[idx] += 1;
        }
        Self {
            lo: HIST_LO,
            hi: HIST_HI,
            counts,
        }
    }
}

/// Aggregate statistics for one (arm, target) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub arm: usize,
    pub target: String,
    pub true_m: f64,
    pub coverage: f64,
    pub avg_ci_length: f64,
    pub standardized_mean: f64,
    pub standardized_var: f64,
    pub histogram: Histogram,
}

/// Per-checkpoint mean absolute error of the running standard-deviation
/// product against the oracle value, for one (arm, target) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveCell {
    pub arm: usize,
    pub target: String,
    pub true_sigma_s: f64,
    pub oracle_std_err: f64,
    pub mean_abs_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceErrorCurve {
    pub checkpoints: Vec<usize>,
    pub oracle_samples: usize,
    pub cells: Vec<CurveCell>,
}

/// Deterministic aggregate of a full experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateResult {
    pub schema_version: u32,
    pub n: usize,
    pub confidence_level: f64,
    pub base_seed: u64,
    pub n_trials: usize,
    pub n_failed: usize,
    pub cells: Vec<AggregateCell>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variance_error: Option<VarianceErrorCurve>,
}

/// Build the experiment-wide ground truth from the dedicated seed stream.
pub fn build_truth(config: &ExperimentConfig) -> Result<GroundTruth> {
    let mut rng = truth_rng(config.base_seed);
    crate::model::generate_ground_truth(
        config.d1,
        config.d2,
        config.r,
        &config.singular_values(0),
        &config.singular_values(1),
        config.sigma0,
        config.sigma1,
        &mut rng,
    )
}

/// Run a closure inside the configured thread pool (0 = global pool).
pub fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        Ok(f())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// Run all trials. The result vector is indexed by trial, independent of
/// scheduling order.
pub fn run_trials(
    config: &ExperimentConfig,
) -> Result<(GroundTruth, Vec<std::result::Result<TrialResult, TrialError>>)> {
    config.validate()?;
    let truth = build_truth(config)?;
    let results = with_pool(config.threads, || {
        (0..config.n_trials)
            .into_par_iter()
            .map(|trial| run_trial(config, &truth, trial))
            .collect::<Vec<_>>()
    })?;
    Ok((truth, results))
}

/// Fold per-trial results into the aggregate. Failed trials are excluded and
/// counted; more than 1% failures aborts the experiment.
pub fn aggregate(
    config: &ExperimentConfig,
    results: &[std::result::Result<TrialResult, TrialError>],
) -> Result<AggregateResult> {
    if config.n == 0 {
        return Err(Error::Config(
            "aggregation needs n >= 1 (intervals are undefined at n = 0)".into(),
        ));
    }
    let total = results.len();
    let failed = results.iter().filter(|r| r.is_err()).count();
    if (failed as f64) > 0.01 * total as f64 {
        return Err(Error::TooManyFailures { failed, total });
    }
    let ok: Vec<&TrialResult> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let first = ok
        .first()
        .ok_or_else(|| Error::Config("no successful trials to aggregate".into()))?;

    let n_cells = first.reports.len();
    let mut cells = Vec::with_capacity(n_cells);
    for cell_idx in 0..n_cells {
        let template = &first.reports[cell_idx];
        let mut covered = 0usize;
        let mut length_sum = 0.0;
        let mut zs = Vec::with_capacity(ok.len());
        for trial in &ok {
            let report = &trial.reports[cell_idx];
            debug_assert_eq!(report.arm, template.arm);
            if report.covered.expect("aggregation requires n >= 1") {
                covered += 1;
            }
            length_sum += 2.0 * report.interval.expect("n >= 1").half_width;
            zs.push(report.standardized.expect("n >= 1"));
        }
        let count = ok.len() as f64;
        let mean = zs.iter().sum::<f64>() / count;
        let var = if zs.len() > 1 {
            zs.iter().map(|z| (z - mean) * (z - mean)).sum::<f64>() / (count - 1.0)
        } else {
            0.0
        };
        cells.push(AggregateCell {
            arm: template.arm,
            target: template.target.clone(),
            true_m: template.m_true,
            coverage: covered as f64 / count,
            avg_ci_length: length_sum / count,
            standardized_mean: mean,
            standardized_var: var,
            histogram: Histogram::from_values(&zs),
        });
    }

    Ok(AggregateResult {
        schema_version: SCHEMA_VERSION,
        n: config.n,
        confidence_level: config.confidence_level,
        base_seed: config.base_seed,
        n_trials: total,
        n_failed: failed,
        cells,
        variance_error: None,
    })
}

/// Full experiment: run every trial and aggregate.
pub fn run_experiment(config: &ExperimentConfig) -> Result<AggregateResult> {
    let (_truth, results) = run_trials(config)?;
    aggregate(config, &results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            d1: 8,
            d2: 8,
            r: 2,
            n: 40,
            init_n0: 60,
            init_max_iter: 80,
            init_tol: 1e-5,
            n_trials: 4,
            base_seed: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_trial_aggregate_equals_trial_indicators() {
        let mut config = tiny_config();
        config.n_trials = 1;
        let (truth, results) = run_trials(&config).unwrap();
        let agg = aggregate(&config, &results).unwrap();
        let trial = results[0].as_ref().unwrap();
        assert_eq!(agg.n_trials, 1);
        assert_eq!(agg.cells.len(), 2);
        for (cell, report) in agg.cells.iter().zip(&trial.reports) {
            assert_eq!(cell.coverage, if report.covered.unwrap() { 1.0 } else { 0.0 });
            let len = 2.0 * report.interval.unwrap().half_width;
            assert!((cell.avg_ci_length - len).abs() < 1e-15);
            assert_eq!(cell.histogram.counts.iter().sum::<u64>(), 1);
        }
        drop(truth);
    }

    #[test]
    fn failure_budget_is_enforced() {
        let config = tiny_config();
        let (_, mut results) = run_trials(&config).unwrap();
        // 1 of 4 failed: 25% > 1% aborts.
        results[2] = Err(TrialError {
            trial: 2,
            step: Some(1),
            source: Error::NonFiniteScore,
        });
        match aggregate(&config, &results) {
            Err(Error::TooManyFailures { failed: 1, total: 4 }) => {}
            other => panic!("expected failure-budget abort, got {other:?}"),
        }
    }

    #[test]
    fn histogram_counts_sum_and_clamp() {
        let h = Histogram::from_values(&[-10.0, -4.0, 0.0, 3.99, 10.0]);
        assert_eq!(h.counts.iter().sum::<u64>(), 5);
        assert_eq!(h.counts[0], 2); // -10 clamped down, -4.0 in first bin
        assert_eq!(h.counts[HIST_BINS - 1], 2); // 10 clamped up, 3.99 in last
    }
}
