// Scratch probe: initializer accuracy/cost versus lambda factor, n0, tol.

use matbandit::harness::{self, ExperimentConfig};
use matbandit::init::{collect_offline, nuclear_norm_estimate};
use matbandit::linalg::frob_norm;
use std::time::Instant;

fn main() {
    let config = ExperimentConfig::default();
    let truth = harness::build_truth(&config).unwrap();

    for n0 in [2000usize, 4000] {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(7);
        let batch = collect_offline(&truth, n0, &mut rng).unwrap();
        for lam_factor in [0.5, 1.0, 2.0] {
            for tol in [1e-6, 1e-5, 3e-5] {
                let arm = 1;
                let n_arm = batch.count(arm);
                let lambda = lam_factor * 0.1 * (50.0_f64 / n_arm as f64).sqrt();
                let t0 = Instant::now();
                let fit = nuclear_norm_estimate(
                    &batch.per_arm[arm],
                    50,
                    50,
                    lambda,
                    500,
                    tol,
                )
                .unwrap();
                let err = {
                    let diff = &fit.matrix - &truth.arms[arm].m;
                    frob_norm(&diff.view())
                };
                println!(
                    "n0={n0} lam_factor={lam_factor} tol={tol:.0e}: err {err:.4}, iters {}, conv {}, {:.2?}",
                    fit.iterations,
                    fit.converged,
                    t0.elapsed()
                );
            }
        }
    }
}
