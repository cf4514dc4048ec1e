//! Harness-level contracts: determinism, the degenerate n = 0 run, target
//! ordering, and the difference-interval coverage on a reduced configuration.

use matbandit::harness::{self, ExperimentConfig, TargetSpec};
use matbandit::inference::z_two_sided;

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        d1: 10,
        d2: 10,
        r: 2,
        n: 60,
        init_n0: 200,
        init_max_iter: 120,
        init_tol: 1e-5,
        n_trials: 3,
        base_seed: 11,
        ..ExperimentConfig::default()
    }
}

#[test]
fn same_seed_gives_bit_identical_trials() {
    let config = small_config();
    let truth = harness::build_truth(&config).unwrap();
    let a = harness::run_trial(&config, &truth, 0).unwrap();
    let b = harness::run_trial(&config, &truth, 0).unwrap();
    assert_eq!(a, b);

    let c = harness::run_trial(&config, &truth, 1).unwrap();
    assert_ne!(a.reports[0].m_hat, c.reports[0].m_hat);
}

#[test]
fn zero_step_run_projects_the_initializer_without_intervals() {
    let mut config = small_config();
    config.n = 0;
    let truth = harness::build_truth(&config).unwrap();
    let trial = harness::run_trial(&config, &truth, 0).unwrap();
    for report in &trial.reports {
        assert!(report.interval.is_none());
        assert!(report.covered.is_none());
        assert!(report.standardized.is_none());
        assert!(report.m_hat.is_finite());
    }
    // Aggregation refuses n = 0.
    let results = vec![Ok(trial)];
    assert!(harness::aggregate(&config, &results).is_err());
}

#[test]
fn reports_are_target_major_with_both_arms() {
    let mut config = small_config();
    config.targets = vec![
        TargetSpec::single_entry("T1", 1, 1),
        TargetSpec {
            label: "T2".into(),
            entries: vec![(1, 1, 1.0), (2, 2, 2.0), (3, 3, -3.0)],
        },
    ];
    let truth = harness::build_truth(&config).unwrap();
    let trial = harness::run_trial(&config, &truth, 0).unwrap();
    let labels: Vec<(usize, &str)> = trial
        .reports
        .iter()
        .map(|r| (r.arm, r.target.as_str()))
        .collect();
    assert_eq!(
        labels,
        vec![(0, "T1"), (1, "T1"), (0, "T2"), (1, "T2")]
    );
}

#[test]
fn checkpoint_snapshots_land_on_requested_steps() {
    let config = small_config();
    let truth = harness::build_truth(&config).unwrap();
    let trial =
        harness::run_trial_with_checkpoints(&config, &truth, 0, &[10, 30, 60]).unwrap();
    let steps: Vec<usize> = trial.checkpoints.iter().map(|c| c.t).collect();
    assert_eq!(steps, vec![10, 30, 60]);
    for snap in &trial.checkpoints {
        assert!(snap.sigma_s[0][0] >= 0.0 && snap.sigma_s[0][1] >= 0.0);
        assert!(snap.sgd_error[0].is_finite() && snap.sgd_error[1].is_finite());
    }
    // The final snapshot's error matches the trial's final error.
    let last = trial.checkpoints.last().unwrap();
    assert_eq!(last.sgd_error, trial.final_sgd_error);
}

#[test]
fn resampled_truth_changes_the_target_value() {
    let mut config = small_config();
    config.resample_truth = true;
    let shared = harness::build_truth(&config).unwrap();
    let a = harness::run_trial(&config, &shared, 0).unwrap();
    let b = harness::run_trial(&config, &shared, 1).unwrap();
    // Different trials draw different truths, so the true linear forms differ.
    assert_ne!(a.reports[0].m_true, b.reports[0].m_true);
}

// Difference-interval coverage on a reduced configuration. The per-trial
// reports carry everything the two-arm difference needs.
#[test]
fn difference_interval_coverage_is_near_nominal() {
    let config = ExperimentConfig {
        d1: 20,
        d2: 20,
        r: 3,
        n: 2000,
        init_n0: 1000,
        init_max_iter: 300,
        init_tol: 1e-6,
        n_trials: 500,
        base_seed: 23,
        ..ExperimentConfig::default()
    };
    let (_, results) = harness::run_trials(&config).unwrap();
    let z = z_two_sided(0.95).unwrap();
    let mut covered = 0usize;
    let mut total = 0usize;
    for trial in results.iter().map(|r| r.as_ref().unwrap()) {
        let r0 = &trial.reports[0];
        let r1 = &trial.reports[1];
        assert_eq!((r0.arm, r1.arm), (0, 1));
        let var = (r0.sigma_hat * r0.s_hat).powi(2) + (r1.sigma_hat * r1.s_hat).powi(2);
        let half = z * (var / trial.n as f64).sqrt();
        let point = r1.m_hat - r0.m_hat;
        let true_diff = r1.m_true - r0.m_true;
        if (true_diff - point).abs() <= half {
            covered += 1;
        }
        total += 1;
    }
    let coverage = covered as f64 / total as f64;
    assert!(
        (0.88..=0.99).contains(&coverage),
        "difference coverage {coverage}"
    );
}
