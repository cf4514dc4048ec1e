//! Command-line harness: run Monte Carlo experiments, variance-error curves,
//! and the true-variance oracle from a TOML config.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use matbandit::harness::{
    self, export_results, to_csv_string, to_json_string, ExperimentConfig,
};
use matbandit::inference::true_s2_oracle;

#[derive(Parser)]
#[command(
    name = "matbandit",
    about = "Online inference for low-rank matrix contextual bandits",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML experiment config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the number of Monte Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the worker thread count (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> matbandit::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(trials) = self.trials {
            config.n_trials = trials;
        }
        if let Some(seed) = self.seed {
            config.base_seed = seed;
        }
        if let Some(threads) = self.threads {
            config.threads = threads;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, default_value = "json", value_parser = ["csv", "json"])]
    format: String,
}

impl OutputArgs {
    fn emit(&self, aggregate: &harness::AggregateResult) -> matbandit::Result<()> {
        match &self.out {
            Some(path) => {
                export_results(aggregate, &self.format, path)?;
                eprintln!("wrote {} ({})", path.display(), self.format);
            }
            None => {
                let body = match self.format.as_str() {
                    "json" => to_json_string(aggregate)?,
                    _ => to_csv_string(aggregate),
                };
                println!("{body}");
            }
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and report coverage, interval lengths,
    /// and standardized-statistic summaries.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run trials with checkpoints and report the mean absolute error of the
    /// running standard-deviation product against the oracle value.
    Curve {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Checkpoints as `start:end:step` (inclusive) or a comma list.
        #[arg(long, default_value = "50:2000:50")]
        checkpoints: String,
        /// Monte Carlo samples for the oracle standard deviation.
        #[arg(long, default_value_t = 1_000_000)]
        oracle_samples: usize,
    },
    /// Estimate the true asymptotic variance S^2 for one arm and target.
    OracleS2 {
        #[command(flatten)]
        common: CommonArgs,
        /// Arm index (0 or 1).
        #[arg(long)]
        arm: usize,
        /// Target label from the config; the first target when omitted.
        #[arg(long)]
        target: Option<String>,
        /// Monte Carlo sample count.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
    },
}

fn parse_checkpoints(spec: &str) -> matbandit::Result<Vec<usize>> {
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| matbandit::Error::Config(format!("bad checkpoint value {s:?}")))
    };
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(matbandit::Error::Config(
                "checkpoint ranges look like start:end:step".into(),
            ));
        }
        let (start, end, step) = (parse(parts[0])?, parse(parts[1])?, parse(parts[2])?);
        if step == 0 || start == 0 || end < start {
            return Err(matbandit::Error::Config("bad checkpoint range".into()));
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        spec.split(',').map(parse).collect()
    }
}

fn print_summary(aggregate: &harness::AggregateResult, elapsed: std::time::Duration) {
    eprintln!(
        "n = {}, trials = {} ({} failed), level = {}, seed = {} [{elapsed:.1?}]",
        aggregate.n,
        aggregate.n_trials,
        aggregate.n_failed,
        aggregate.confidence_level,
        aggregate.base_seed,
    );
    for cell in &aggregate.cells {
        eprintln!(
            "  arm {} {:<4} coverage {:.3}  avg CI length {:.5}  z mean {:+.3}  z var {:.3}",
            cell.arm, cell.target, cell.coverage, cell.avg_ci_length,
            cell.standardized_mean, cell.standardized_var
        );
    }
    if let Some(curve) = &aggregate.variance_error {
        for cell in &curve.cells {
            let first = cell.mean_abs_error.first().copied().unwrap_or(f64::NAN);
            let last = cell.mean_abs_error.last().copied().unwrap_or(f64::NAN);
            eprintln!(
                "  arm {} {:<4} |sigma_hat*S_hat - sigma*S|: {:.5} @ n={} -> {:.5} @ n={}",
                cell.arm,
                cell.target,
                first,
                curve.checkpoints.first().unwrap(),
                last,
                curve.checkpoints.last().unwrap()
            );
        }
    }
}

fn run() -> matbandit::Result<()> {
    match Cli::parse().command {
        Command::Run { common, output } => {
            let config = common.load()?;
            let start = Instant::now();
            let aggregate = harness::run_experiment(&config)?;
            print_summary(&aggregate, start.elapsed());
            output.emit(&aggregate)
        }
        Command::Curve {
            common,
            output,
            checkpoints,
            oracle_samples,
        } => {
            let config = common.load()?;
            let checkpoints = parse_checkpoints(&checkpoints)?;
            let start = Instant::now();
            let aggregate = harness::variance_error_curve(&config, &checkpoints, oracle_samples)?;
            print_summary(&aggregate, start.elapsed());
            output.emit(&aggregate)
        }
        Command::OracleS2 {
            common,
            arm,
            target,
            samples,
        } => {
            let config = common.load()?;
            if arm > 1 {
                return Err(matbandit::Error::Config("arm must be 0 or 1".into()));
            }
            let truth = harness::build_truth(&config)?;
            let targets = config.build_targets()?;
            let chosen = match &target {
                Some(label) => targets
                    .iter()
                    .find(|t| &t.label == label)
                    .ok_or_else(|| {
                        matbandit::Error::Config(format!("no target labelled {label:?}"))
                    })?,
                None => &targets[0],
            };
            let seed = harness::rng::oracle_seed(config.base_seed);
            let est = true_s2_oracle(&truth, chosen, arm, config.epsilon, samples, seed)?;
            println!(
                "{{\"target\": \"{}\", \"arm\": {}, \"samples\": {}, \"s2\": {:.16e}, \"s\": {:.16e}, \"std_err\": {:.16e}, \"sigma_s\": {:.16e}}}",
                chosen.label,
                arm,
                est.samples,
                est.s2,
                est.s(),
                est.std_err,
                config.sigma(arm) * est.s()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
