// Scratch probe for the reduced-trial pre-checks of the acceptance bands.
// Usage: probe_accept <mode> <trials>   with mode in {t2, r5, r7, n1000}.

use matbandit::harness::{self, ExperimentConfig, TargetSpec};
use std::time::Instant;

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "t2".into());
    let trials: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(150);

    let mut config = ExperimentConfig {
        n_trials: trials,
        base_seed: 451,
        init_tol: 1e-5,
        ..ExperimentConfig::default()
    };
    match mode.as_str() {
        "t2" => {
            config.targets = vec![TargetSpec {
                label: "T2".into(),
                entries: vec![(1, 1, 1.0), (2, 2, 2.0), (3, 3, -3.0)],
            }];
        }
        "r5" => config.r = 5,
        "r7" => config.r = 7,
        "n1000" => config.n = 1000,
        other => panic!("unknown mode {other}"),
    }

    let start = Instant::now();
    let agg = harness::run_experiment(&config).unwrap();
    println!(
        "mode {mode}: {} trials in {:.1?} ({} failed)",
        trials,
        start.elapsed(),
        agg.n_failed
    );
    for cell in &agg.cells {
        println!(
            "  arm {} {}: coverage {:.3}, len {:.5}, z mean {:+.3}, z var {:.3}",
            cell.arm, cell.target, cell.coverage, cell.avg_ci_length,
            cell.standardized_mean, cell.standardized_var
        );
    }
}
