// Scratch probe for timing and early-step stability. Not part of the test
// suite.

use matbandit::harness::{self, ExperimentConfig};
use matbandit::init::{collect_offline, default_lambda, nuclear_norm_estimate};
use matbandit::linalg::frob_norm;
use std::time::Instant;

fn main() {
    let trials: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(20);
    let t_star: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let seed: u64 = std::env::args()
        .nth(3)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);

    let config = ExperimentConfig {
        n_trials: trials,
        step_t_star: t_star,
        base_seed: seed,
        ..ExperimentConfig::default()
    };

    // Init quality + cost on one trial's offline data.
    let truth = harness::build_truth(&config).unwrap();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(999);
    let batch = collect_offline(&truth, config.init_n0, &mut rng).unwrap();
    let t0 = Instant::now();
    for arm in 0..2 {
        let lambda = default_lambda(0.1, 50, 50, batch.count(arm));
        let fit = nuclear_norm_estimate(
            &batch.per_arm[arm],
            50,
            50,
            lambda,
            config.init_max_iter,
            config.init_tol,
        )
        .unwrap();
        let err = {
            let diff = &fit.matrix - &truth.arms[arm].m;
            frob_norm(&diff.view())
        };
        println!(
            "arm {arm}: init err {err:.4}, iters {}, converged {} ({:.2?})",
            fit.iterations,
            fit.converged,
            t0.elapsed()
        );
    }

    let t1 = Instant::now();
    let (truth, results) = harness::run_trials(&config).unwrap();
    let dt = t1.elapsed();
    let ok: Vec<_> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    println!(
        "{} trials in {:.1?} ({:.2?}/trial wall), {} failed",
        trials,
        dt,
        dt / trials as u32,
        results.len() - ok.len()
    );

    let mut max_err = [0f64; 2];
    let mut med_err: Vec<[f64; 2]> = vec![];
    for t in &ok {
        for arm in 0..2 {
            max_err[arm] = max_err[arm].max(t.final_sgd_error[arm]);
        }
        med_err.push(t.final_sgd_error);
    }
    med_err.sort_by(|a, b| a[1].partial_cmp(&b[1]).unwrap());
    println!(
        "final sgd err: max {:?}, median arm1 {:.4}",
        max_err,
        med_err[med_err.len() / 2][1]
    );

    let agg = harness::aggregate(&config, &results).unwrap();
    for cell in &agg.cells {
        println!(
            "arm {} {}: coverage {:.3}, len {:.5}, z mean {:.3}, z var {:.3}, true_m {:.5}",
            cell.arm,
            cell.target,
            cell.coverage,
            cell.avg_ci_length,
            cell.standardized_mean,
            cell.standardized_var,
            cell.true_m
        );
    }

    // Oracle S per arm for reference.
    let targets = config.build_targets().unwrap();
    for arm in 0..2 {
        let est =
            matbandit::inference::true_s2_oracle(&truth, &targets[0], arm, 0.1, 400_000, 42)
                .unwrap();
        println!(
            "arm {arm}: oracle sigma*S = {:.5} (se {:.5}) => asymptotic len {:.5}",
            0.1 * est.s(),
            est.std_err,
            2.0 * 1.959964 * 0.1 * est.s() / (config.n as f64).sqrt()
        );
    }
}
