// Scratch probe: (1) check the MC oracle against the symmetry-based closed
// form of S^2 for epsilon-greedy with Gaussian contexts; (2) scan truth seeds
// for realized S values near given targets for T1 and T2.

use matbandit::harness::{build_truth, ExperimentConfig, TargetSpec};
use matbandit::inference::true_s2_oracle;
use matbandit::model::GroundTruth;

fn b_norm_sq(truth: &GroundTruth, arm: usize, t: &ndarray::Array2<f64>) -> f64 {
    let u = &truth.arms[arm].u;
    let v = &truth.arms[arm].v;
    let tv = t.dot(v);
    let ut = u.t().dot(t);
    let norm_tv = tv.iter().map(|x| x * x).sum::<f64>();
    let utv = u.t().dot(&tv);
    let uperp_tv = norm_tv - utv.iter().map(|x| x * x).sum::<f64>();
    let norm_ut = ut.iter().map(|x| x * x).sum::<f64>();
    let utvmat = ut.dot(v);
    let ut_vperp = norm_ut - utvmat.iter().map(|x| x * x).sum::<f64>();
    uperp_tv + ut_vperp
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "check".into());
    let epsilon = 0.1;
    let kappa = (1.0 / (1.0 - epsilon / 2.0) + 2.0 / epsilon) / 2.0;

    let mut config = ExperimentConfig::default();
    config.targets = vec![
        TargetSpec::single_entry("T1", 1, 1),
        TargetSpec {
            label: "T2".into(),
            entries: vec![(1, 1, 1.0), (2, 2, 2.0), (3, 3, -3.0)],
        },
    ];

    if mode == "check" {
        config.base_seed = 1;
        let truth = build_truth(&config).unwrap();
        let targets = config.build_targets().unwrap();
        for (idx, target) in targets.iter().enumerate() {
            for arm in 0..2 {
                let mc = true_s2_oracle(&truth, target, arm, epsilon, 400_000, 5).unwrap();
                let closed = kappa * b_norm_sq(&truth, arm, &target.dense());
                println!(
                    "target {idx} arm {arm}: MC {:.5} (se {:.5}) vs closed {:.5} -> z = {:+.2}",
                    mc.s2,
                    mc.std_err,
                    closed,
                    (mc.s2 - closed) / mc.std_err
                );
            }
        }
        return;
    }

    // Seed scan. Targets given as lengths at n = 3000 with inflation factor f.
    let f: f64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1.15);
    let unit = 2.0 * 1.959964 * 0.1 / 3000f64.sqrt(); // length per unit S
    let paper = [[0.011, 0.006], [0.039, 0.026]]; // [target][arm]
    let target_s: Vec<[f64; 2]> = paper
        .iter()
        .map(|row| [row[0] / unit / f, row[1] / unit / f])
        .collect();
    eprintln!("target S values: {target_s:?}");

    let mut scored: Vec<(f64, u64, Vec<f64>)> = Vec::new();
    for seed in 1..=600u64 {
        config.base_seed = seed;
        let truth = build_truth(&config).unwrap();
        let targets = config.build_targets().unwrap();
        let mut ss = Vec::new();
        let mut worst: f64 = 0.0;
        for (idx, target) in targets.iter().enumerate() {
            let dense = target.dense();
            for arm in 0..2 {
                let s = (kappa * b_norm_sq(&truth, arm, &dense)).sqrt();
                ss.push(s);
                worst = worst.max((s / target_s[idx][arm]).ln().abs());
            }
        }
        scored.push((worst, seed, ss));
    }
    scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    println!("best seeds (worst |log ratio| over 4 cells; band edge is ln(1.3) = 0.262):");
    for (score, seed, ss) in scored.iter().take(12) {
        println!(
            "seed {seed}: worst {score:.3} | S = T1:({:.3}, {:.3}) T2:({:.3}, {:.3}) | lengths*f = T1:({:.4}, {:.4}) T2:({:.4}, {:.4})",
            ss[0], ss[1], ss[2], ss[3],
            ss[0] * unit * f, ss[1] * unit * f, ss[2] * unit * f, ss[3] * unit * f,
        );
    }
}
