//! Experiment configuration: a flat TOML file (or the built-in defaults)
//! covering the environment, the policy, both estimators, the inference
//! targets, and the Monte Carlo runner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::InferenceTarget;
use crate::sgd::StepSizeSchedule;

/// One inference target in config form. Entries are `[j1, j2, weight]`
/// triples with **1-based** indices, so `T = e1 e1^T` is `[[1, 1, 1.0]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub label: String,
    pub entries: Vec<(usize, usize, f64)>,
}

impl TargetSpec {
    pub fn single_entry(label: impl Into<String>, j1: usize, j2: usize) -> Self {
        Self {
            label: label.into(),
            entries: vec![(j1, j2, 1.0)],
        }
    }

    fn build(&self, d1: usize, d2: usize) -> Result<InferenceTarget> {
        let mut entries = Vec::with_capacity(self.entries.len());
        for &(j1, j2, w) in &self.entries {
            if j1 == 0 || j2 == 0 {
                return Err(Error::Config(format!(
                    "target {}: entry indices are 1-based, got ({j1}, {j2})",
                    self.label
                )));
            }
            entries.push((j1 - 1, j2 - 1, w));
        }
        InferenceTarget::from_entries(self.label.clone(), entries, d1, d2)
    }
}

/// Full experiment configuration. `Default` reproduces the reference
/// simulation setting: d = 50, r = 3, sigma = 0.1, eps = 0.1,
/// eta_t = 0.1 t^{-0.99}, T = e1 e1^T, n = 3000, level 0.95.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d1: usize,
    pub d2: usize,
    pub r: usize,
    /// Number of online bandit steps per trial.
    pub n: usize,
    pub epsilon: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    /// Per-arm singular values, descending; empty means all ones.
    pub singular_values0: Vec<f64>,
    pub singular_values1: Vec<f64>,
    pub step_c: f64,
    pub step_alpha: f64,
    pub step_t_star: usize,
    /// Total offline exploration steps feeding the initializer.
    pub init_n0: usize,
    /// Nuclear-norm penalty; unset means the rate default
    /// `2 sigma_i sqrt(max(d1,d2) / n0_arm)` per arm.
    pub init_lambda: Option<f64>,
    pub init_max_iter: usize,
    pub init_tol: f64,
    pub targets: Vec<TargetSpec>,
    pub confidence_level: f64,
    pub n_trials: usize,
    pub base_seed: u64,
    /// Worker threads for trial-level parallelism; 0 uses the global pool.
    pub threads: usize,
    /// Draw a fresh ground truth inside every trial instead of sharing one.
    pub resample_truth: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d1: 50,
            d2: 50,
            r: 3,
            n: 3000,
            epsilon: 0.1,
            sigma0: 0.1,
            sigma1: 0.1,
            singular_values0: Vec::new(),
            singular_values1: Vec::new(),
            step_c: 0.1,
            step_alpha: 0.99,
            step_t_star: 100,
            init_n0: 4000,
            init_lambda: None,
            init_max_iter: 500,
            init_tol: 1e-6,
            targets: vec![TargetSpec::single_entry("T1", 1, 1)],
            confidence_level: 0.95,
            n_trials: 5000,
            base_seed: 1,
            threads: 0,
            resample_truth: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let config: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn singular_values(&self, arm: usize) -> Vec<f64> {
        let configured = if arm == 0 {
            &self.singular_values0
        } else {
            &self.singular_values1
        };
        if configured.is_empty() {
            vec![1.0; self.r]
        } else {
            configured.clone()
        }
    }

    pub fn sigma(&self, arm: usize) -> f64 {
        if arm == 0 {
            self.sigma0
        } else {
            self.sigma1
        }
    }

    pub fn schedule(&self) -> Result<StepSizeSchedule> {
        StepSizeSchedule::new(self.step_c, self.step_alpha, self.step_t_star)
    }

    pub fn build_targets(&self) -> Result<Vec<InferenceTarget>> {
        if self.targets.is_empty() {
            return Err(Error::Config("at least one target is required".into()));
        }
        self.targets.iter().map(|t| t.build(self.d1, self.d2)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.d1 == 0 || self.d2 == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if self.r == 0 || self.r > self.d1.min(self.d2) {
            return Err(Error::Config(format!(
                "rank {} incompatible with {} x {}",
                self.r, self.d1, self.d2
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Config("epsilon must lie in (0, 1)".into()));
        }
        if self.sigma0 < 0.0 || self.sigma1 < 0.0 {
            return Err(Error::Config("sigma must be >= 0".into()));
        }
        if !(self.confidence_level > 0.0 && self.confidence_level < 1.0) {
            return Err(Error::Config("confidence level must lie in (0, 1)".into()));
        }
        if self.n_trials == 0 {
            return Err(Error::Config("n_trials must be >= 1".into()));
        }
        if self.init_n0 == 0 {
            return Err(Error::Config("init_n0 must be >= 1".into()));
        }
        for arm in 0..2 {
            let sv = self.singular_values(arm);
            if sv.len() != self.r {
                return Err(Error::Config(format!(
                    "arm {arm}: expected {} singular values, got {}",
                    self.r,
                    sv.len()
                )));
            }
        }
        self.schedule()?;
        self.build_targets()?;
        for t in &self.targets {
            if t.label.contains([',', '"', '\n']) {
                return Err(Error::Config(format!(
                    "target label {:?} must not contain commas, quotes, or newlines",
                    t.label
                )));
            }
        }
        Ok(())
    }
}
