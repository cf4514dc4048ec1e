//! One end-to-end trial: offline initialization, then the online loop
//! (context, propensity, action, reward, debias, SGD update, variance
//! accumulation), then projection, point estimates, and intervals.

use ndarray::Array2;

use crate::debias::UnbiasedState;
use crate::error::{Error, TrialError};
use crate::inference::{
    confidence_interval, point_estimate, project_topr, IntervalEstimate, VarianceAccumulators,
};
use crate::init::{collect_offline, default_lambda, factorize_init, nuclear_norm_estimate};
use crate::linalg::{frob_inner, frob_norm};
use crate::model::{generate_ground_truth, realize_reward, sample_context, GroundTruth, Observation};
use crate::policy::{draw_action, propensity_from_score};
use crate::sgd::{apply_factored_update, FactorPair, SvdByproducts};

use super::config::ExperimentConfig;
use super::rng::trial_rng;

/// Inference outcome for one (arm, target) cell. The interval fields are
/// absent for degenerate runs with n = 0, where only the point estimate from
/// the projected initializer is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmTargetReport {
    pub arm: usize,
    pub target: String,
    pub m_hat: f64,
    pub m_true: f64,
    /// `<M_unbs, T>` before the low-rank projection.
    pub m_hat_unprojected: f64,
    /// `<M_sgd, T>` of the final biased low-rank estimate.
    pub m_hat_sgd: f64,
    pub sigma_hat: f64,
    pub s_hat: f64,
    pub interval: Option<IntervalEstimate>,
    pub covered: Option<bool>,
    pub standardized: Option<f64>,
}

/// Snapshot of the running `sigma_hat * S_hat` products (and the current
/// SGD estimation errors) at a checkpoint step.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSnapshot {
    pub t: usize,
    /// Indexed `[target][arm]`.
    pub sigma_s: Vec<[f64; 2]>,
    /// `|M_sgd_{i,t} - M_i|_F` per arm.
    pub sgd_error: [f64; 2],
}

/// Everything one trial produces. Cells are ordered target-major, arm 0
/// before arm 1.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub n: usize,
    pub reports: Vec<ArmTargetReport>,
    pub final_sgd_error: [f64; 2],
    pub cumulative_reward: f64,
    pub checkpoints: Vec<CheckpointSnapshot>,
}

/// The step phases of the online loop, in required order. The debias update
/// must always consume the SGD state from before the same step's SGD update;
/// the phase machine turns any ordering mistake into a panic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Context,
    Propensity,
    Action,
    Reward,
    Debias,
    SgdUpdate,
    Accumulate,
}

#[derive(Debug)]
struct StepPhase(Phase);

impl StepPhase {
    fn new() -> Self {
        Self(Phase::Context)
    }

    fn advance(&mut self, expected: Phase) {
        assert_eq!(self.0, expected, "step phase out of order");
        self.0 = match expected {
            Phase::Context => Phase::Propensity,
            Phase::Propensity => Phase::Action,
            Phase::Action => Phase::Reward,
            Phase::Reward => Phase::Debias,
            Phase::Debias => Phase::SgdUpdate,
            Phase::SgdUpdate => Phase::Accumulate,
            Phase::Accumulate => Phase::Context,
        };
    }
}

/// Run one trial with the shared ground truth (or a per-trial resample).
pub fn run_trial(
    config: &ExperimentConfig,
    truth: &GroundTruth,
    trial: usize,
) -> std::result::Result<TrialResult, TrialError> {
    run_trial_with_checkpoints(config, truth, trial, &[])
}

/// Like [`run_trial`], additionally snapshotting the running
/// `sigma_hat * S_hat` products at the given (ascending) step indices.
pub fn run_trial_with_checkpoints(
    config: &ExperimentConfig,
    truth: &GroundTruth,
    trial: usize,
    checkpoints: &[usize],
) -> std::result::Result<TrialResult, TrialError> {
    let fail = |step: Option<usize>, source: Error| TrialError {
        trial,
        step,
        source,
    };

    let mut rng = trial_rng(config.base_seed, trial);
    let resampled;
    let truth = if config.resample_truth {
        resampled = generate_ground_truth(
            config.d1,
            config.d2,
            config.r,
            &config.singular_values(0),
            &config.singular_values(1),
            config.sigma0,
            config.sigma1,
            &mut rng,
        )
        .map_err(|e| fail(None, e))?;
        &resampled
    } else {
        truth
    };

    let targets = config.build_targets().map_err(|e| fail(None, e))?;
    let schedule = config.schedule().map_err(|e| fail(None, e))?;

    // Offline phase: uniform exploration, nuclear-norm fit, balanced split.
    let batch =
        collect_offline(truth, config.init_n0, &mut rng).map_err(|e| fail(None, e))?;
    let mut states: Vec<FactorPair> = Vec::with_capacity(2);
    let mut m_sgd: Vec<Array2<f64>> = Vec::with_capacity(2);
    let mut m_init: Vec<Array2<f64>> = Vec::with_capacity(2);
    for arm in 0..2 {
        let lambda = config.init_lambda.unwrap_or_else(|| {
            default_lambda(config.sigma(arm), config.d1, config.d2, batch.count(arm))
        });
        let fit = nuclear_norm_estimate(
            &batch.per_arm[arm],
            config.d1,
            config.d2,
            lambda,
            config.init_max_iter,
            config.init_tol,
        )
        .map_err(|e| fail(None, e))?;
        let pair = factorize_init(&fit.matrix, config.r).map_err(|e| fail(None, e))?;
        m_sgd.push(pair.product());
        m_init.push(fit.matrix);
        states.push(pair);
    }
    let mut states: [FactorPair; 2] = [states.remove(0), states.remove(0)];
    let mut m_sgd: [Array2<f64>; 2] = [m_sgd.remove(0), m_sgd.remove(0)];
    let mut unbiased = UnbiasedState::new([m_init.remove(0), m_init.remove(0)]);

    let mut acc = VarianceAccumulators::new(targets.len());
    let mut cumulative_reward = 0.0;
    let mut phase = StepPhase::new();
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut next_checkpoint = 0usize;

    for t in 1..=config.n {
        let stepfail = |e: Error| TrialError {
            trial,
            step: Some(t),
            source: e,
        };

        phase.advance(Phase::Context);
        let x = sample_context(config.d1, config.d2, &mut rng);
        let inner = [
            frob_inner(&m_sgd[0].view(), &x.view()),
            frob_inner(&m_sgd[1].view(), &x.view()),
        ];

        phase.advance(Phase::Propensity);
        let pi = propensity_from_score(inner[1] - inner[0], config.epsilon)
            .map_err(stepfail)?;

        phase.advance(Phase::Action);
        let a = draw_action(pi, &mut rng).map_err(stepfail)?;

        phase.advance(Phase::Reward);
        let (y, _xi) = realize_reward(truth, &x, a, &mut rng);
        let obs = Observation { t, x, pi, a, y };
        cumulative_reward += obs.y;

        // Both the debias surrogate and the variance terms must see the SGD
        // estimates from time t-1, i.e. before this step's update.
        phase.advance(Phase::Debias);
        unbiased
            .step_with_inner(&m_sgd, inner, &obs.x, obs.y, obs.a, obs.pi)
            .map_err(stepfail)?;

        phase.advance(Phase::SgdUpdate);
        let byproducts = SvdByproducts::compute(&states[obs.a]).map_err(stepfail)?;
        let basis_u = byproducts.basis_u(&states[obs.a]);
        let basis_v = byproducts.basis_v(&states[obs.a]);
        apply_factored_update(
            &mut states[obs.a],
            &byproducts,
            &obs.x,
            obs.y,
            obs.a,
            obs.pi,
            schedule.step_size(t),
        )
        .map_err(stepfail)?;
        m_sgd[obs.a] = states[obs.a].product();

        phase.advance(Phase::Accumulate);
        acc.accumulate_sigma2_residual(obs.y - inner[obs.a], obs.a, obs.pi)
            .map_err(stepfail)?;
        acc.accumulate_s2_with_bases(&obs.x, &basis_u, &basis_v, obs.a, obs.pi, &targets)
            .map_err(stepfail)?;
        acc.advance_step();

        while next_checkpoint < checkpoints.len() && checkpoints[next_checkpoint] == t {
            let sigma_s = (0..targets.len())
                .map(|idx| [acc.sigma_s(0, idx), acc.sigma_s(1, idx)])
                .collect();
            let sgd_error = [
                {
                    let diff = &m_sgd[0] - &truth.arms[0].m;
                    frob_norm(&diff.view())
                },
                {
                    let diff = &m_sgd[1] - &truth.arms[1].m;
                    frob_norm(&diff.view())
                },
            ];
            snapshots.push(CheckpointSnapshot { t, sigma_s, sgd_error });
            next_checkpoint += 1;
        }
    }

    // Final projection and per-target inference.
    let m_proj = [
        project_topr(unbiased.estimate(0), config.r).map_err(|e| fail(None, e))?,
        project_topr(unbiased.estimate(1), config.r).map_err(|e| fail(None, e))?,
    ];
    let sigma_hat = [acc.sigma2(0).sqrt(), acc.sigma2(1).sqrt()];
    let mut reports = Vec::with_capacity(2 * targets.len());
    for (idx, target) in targets.iter().enumerate() {
        for arm in 0..2 {
            let m_hat = point_estimate(&m_proj[arm], target);
            let m_true = target.linear_form(&truth.arms[arm].m);
            let m_hat_unprojected = target.linear_form(unbiased.estimate(arm));
            let m_hat_sgd = target.linear_form(&m_sgd[arm]);
            let s_hat = acc.s2(arm, idx).sqrt();
            let (interval, covered, standardized) = if config.n >= 1 {
                let ci = confidence_interval(
                    m_hat,
                    sigma_hat[arm],
                    s_hat,
                    config.n,
                    config.confidence_level,
                )
                .map_err(|e| fail(None, e))?;
                let covered = ci.covers(m_true);
                let z = (config.n as f64).sqrt() * (m_hat - m_true) / (sigma_hat[arm] * s_hat);
                (Some(ci), Some(covered), Some(z))
            } else {
                (None, None, None)
            };
            reports.push(ArmTargetReport {
                arm,
                target: target.label.clone(),
                m_hat,
                m_true,
                m_hat_unprojected,
                m_hat_sgd,
                sigma_hat: sigma_hat[arm],
                s_hat,
                interval,
                covered,
                standardized,
            });
        }
    }

    let final_sgd_error = [
        {
            let diff = &m_sgd[0] - &truth.arms[0].m;
            frob_norm(&diff.view())
        },
        {
            let diff = &m_sgd[1] - &truth.arms[1].m;
            frob_norm(&diff.view())
        },
    ];

    Ok(TrialResult {
        trial,
        n: config.n,
        reports,
        final_sgd_error,
        cumulative_reward,
        checkpoints: snapshots,
    })
}
