//! Variance-estimation error curve: how far the running plug-in product
//! `sigma_hat * S_hat` sits from the oracle `sigma * S`, averaged over
//! trials, at a grid of checkpoint step counts.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::inference::true_s2_oracle;

use super::config::ExperimentConfig;
use super::experiment::{build_truth, with_pool, AggregateResult, CurveCell, VarianceErrorCurve};
use super::rng::oracle_seed;
use super::trial::run_trial_with_checkpoints;

/// Run trials up to `max(checkpoints)` steps, snapshotting the running
/// standard-deviation products, and compare them per checkpoint with the
/// oracle values (computed once per (arm, target) with `oracle_samples`
/// Monte Carlo draws). Returns the aggregate at the final checkpoint with
/// the curve attached.
pub fn variance_error_curve(
    config: &ExperimentConfig,
    checkpoints: &[usize],
    oracle_samples: usize,
) -> Result<AggregateResult> {
    if checkpoints.is_empty() {
        return Err(Error::Config("at least one checkpoint is required".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("checkpoints must be strictly ascending".into()));
    }
    if checkpoints[0] == 0 {
        return Err(Error::Config("checkpoints must be >= 1".into()));
    }
    let mut config = config.clone();
    config.n = *checkpoints.last().expect("nonempty");
    config.validate()?;

    let truth = build_truth(&config)?;
    let targets = config.build_targets()?;

    // Oracle sigma * S per (arm, target); fixed truth, so computed once.
    let seed = oracle_seed(config.base_seed);
    let mut true_sigma_s = Vec::with_capacity(targets.len());
    for target in &targets {
        let mut per_arm = [(0.0, 0.0); 2];
        for arm in 0..2 {
            let est = true_s2_oracle(&truth, target, arm, config.epsilon, oracle_samples, seed)?;
            per_arm[arm] = (config.sigma(arm) * est.s(), est.std_err);
        }
        true_sigma_s.push(per_arm);
    }

    let results = with_pool(config.threads, || {
        (0..config.n_trials)
            .into_par_iter()
            .map(|trial| run_trial_with_checkpoints(&config, &truth, trial, checkpoints))
            .collect::<Vec<_>>()
    })?;
    let mut aggregate = super::experiment::aggregate(&config, &results)?;

    let ok: Vec<_> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let count = ok.len() as f64;
    let mut cells = Vec::with_capacity(2 * targets.len());
    for (idx, target) in targets.iter().enumerate() {
        for arm in 0..2 {
            let mut mean_abs_error = vec![0.0; checkpoints.len()];
            for trial in &ok {
                for (ci, snap) in trial.checkpoints.iter().enumerate() {
                    mean_abs_error[ci] += (snap.sigma_s[idx][arm] - true_sigma_s[idx][arm].0).abs();
                }
            }
            for v in &mut mean_abs_error {
                *v /= count;
            }
            cells.push(CurveCell {
                arm,
                target: target.label.clone(),
                true_sigma_s: true_sigma_s[idx][arm].0,
                oracle_std_err: true_sigma_s[idx][arm].1,
                mean_abs_error,
            });
        }
    }
    aggregate.variance_error = Some(VarianceErrorCurve {
        checkpoints: checkpoints.to_vec(),
        oracle_samples,
        cells,
    });
    Ok(aggregate)
}
