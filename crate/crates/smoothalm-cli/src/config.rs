//! Experiment configuration: a strict JSON schema (unknown keys rejected) plus the
//! command-line overrides that can be layered on top of a loaded file.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Which iteration drives the runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgoChoice {
    /// Single-block smoothed proximal augmented Lagrangian method.
    Alm,
    /// Multi-block variant: the primal vector is split into `blocks` contiguous
    /// near-equal blocks, updated sequentially within each sweep.
    Admm { blocks: usize },
}

fn default_algo() -> AlgoChoice {
    AlgoChoice::Alm
}

fn default_betas() -> Vec<f64> {
    vec![0.2]
}

fn default_record_every() -> u64 {
    1
}

/// One experiment: a family of generated instances and the sweep to run on them.
///
/// JSON keys are exactly these field names. `seeds` is the base seed: trial `k`
/// generates its instance from seed `seeds + k`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Primal dimension.
    pub n: usize,
    /// Number of equality constraints.
    pub m: usize,
    /// Number of independently seeded instances.
    pub trials: usize,
    /// Base seed for instance generation.
    pub seeds: u64,
    #[serde(default = "default_algo")]
    pub algo: AlgoChoice,
    /// Proximal-center mixing weights to sweep; one trace per (trial, β).
    #[serde(default = "default_betas")]
    pub betas: Vec<f64>,
    /// Iteration budget per run.
    pub max_iters: u64,
    /// Early-stop threshold on the stationarity gap; `0.0` disables early stop.
    #[serde(default)]
    pub gap_tol: f64,
    /// Trace recording cadence (iterations between rows).
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    /// Evaluate the merit function along the trace (three inner solves per row).
    #[serde(default)]
    pub compute_phi: bool,
    /// Artifact directory (instances, traces, reports, summaries).
    pub output: PathBuf,
}

impl ExperimentConfig {
    /// Loads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks the cross-field invariants the schema cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            bail!("trials must be at least 1, got {}", self.trials);
        }
        if self.n == 0 || self.m == 0 || self.m > self.n {
            bail!("need 1 <= m <= n, got n = {}, m = {}", self.n, self.m);
        }
        if self.betas.is_empty() {
            bail!("betas must not be empty");
        }
        for &b in &self.betas {
            if !(b > 0.0 && b <= 1.0) {
                bail!("every beta must lie in (0, 1], got {b}");
            }
        }
        if !(self.gap_tol >= 0.0 && self.gap_tol.is_finite()) {
            bail!("gap_tol must be finite and nonnegative, got {}", self.gap_tol);
        }
        if self.record_every == 0 {
            bail!("record_every must be at least 1");
        }
        if let AlgoChoice::Admm { blocks } = self.algo {
            if blocks == 0 || blocks > self.n {
                bail!("blocks must lie in 1..=n, got {blocks} with n = {}", self.n);
            }
        }
        Ok(())
    }
}

/// Command-line overrides applied after loading the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Replaces the base seed.
    pub seed: Option<u64>,
    /// Replaces the artifact directory.
    pub out: Option<PathBuf>,
    /// Replaces the β sweep.
    pub betas: Option<Vec<f64>>,
    /// Turns merit evaluation on.
    pub phi: bool,
}

impl Overrides {
    /// Applies the overrides and re-validates the result.
    pub fn apply(&self, mut cfg: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(seed) = self.seed {
            cfg.seeds = seed;
        }
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(betas) = &self.betas {
            cfg.betas = betas.clone();
        }
        if self.phi {
            cfg.compute_phi = true;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> serde_json::Value {
        serde_json::json!({
            "n": 10,
            "m": 4,
            "trials": 2,
            "seeds": 7,
            "max_iters": 100,
            "output": "/tmp/xyz"
        })
    }

    #[test]
    fn defaults_fill_in() {
        let cfg: ExperimentConfig = serde_json::from_value(minimal_json()).unwrap();
        assert_eq!(cfg.algo, AlgoChoice::Alm);
        assert_eq!(cfg.betas, vec![0.2]);
        assert_eq!(cfg.record_every, 1);
        assert_eq!(cfg.gap_tol, 0.0);
        assert!(!cfg.compute_phi);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = minimal_json();
        v["max_iter"] = serde_json::json!(5);
        assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
    }

    #[test]
    fn admm_choice_parses_with_blocks() {
        let mut v = minimal_json();
        v["algo"] = serde_json::json!({"admm": {"blocks": 2}});
        let cfg: ExperimentConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.algo, AlgoChoice::Admm { blocks: 2 });
        cfg.validate().unwrap();
    }

    #[test]
    fn invalid_fields_fail_validation() {
        let mut cfg: ExperimentConfig = serde_json::from_value(minimal_json()).unwrap();
        cfg.betas = vec![0.0];
        assert!(cfg.validate().is_err());
        cfg.betas = vec![1.5];
        assert!(cfg.validate().is_err());
        cfg.betas = vec![0.2];
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
        cfg.trials = 1;
        cfg.m = 20;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn overrides_apply_in_place() {
        let cfg: ExperimentConfig = serde_json::from_value(minimal_json()).unwrap();
        let over = Overrides {
            seed: Some(99),
            out: Some(PathBuf::from("/tmp/other")),
            betas: Some(vec![0.05, 0.5]),
            phi: true,
        };
        let cfg = over.apply(cfg).unwrap();
        assert_eq!(cfg.seeds, 99);
        assert_eq!(cfg.output, PathBuf::from("/tmp/other"));
        assert_eq!(cfg.betas, vec![0.05, 0.5]);
        assert!(cfg.compute_phi);
    }
}
