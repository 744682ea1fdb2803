//! Experiment configuration files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{AcquisitionConfig, ModisteConfig};
use crate::domain::{RewardKind, RewardSpec, DEFAULT_EPSILON};
use crate::error::{DissError, Result};
use crate::estimators::{BoostConfig, EnsembleConfig};
use crate::runner::{DataSpec, EnvironmentSpec, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionParams {
    pub budget: usize,
    pub warmup: usize,
    pub ensemble_size: usize,
    pub resample: bool,
    pub batch_size: usize,
    pub refit_interval: usize,
    pub action_cap: usize,
    pub checkpoint_every: usize,
    pub max_consecutive_failures: usize,
    pub boost: BoostConfig,
    pub modiste: ModisteConfig,
}

impl Default for AcquisitionParams {
    fn default() -> Self {
        let a = AcquisitionConfig::default();
        AcquisitionParams {
            budget: a.budget,
            warmup: a.warmup,
            ensemble_size: a.ensemble.size,
            resample: a.ensemble.resample,
            batch_size: a.batch_size,
            refit_interval: a.refit_interval,
            action_cap: a.action_cap,
            checkpoint_every: a.checkpoint_every,
            max_consecutive_failures: a.max_consecutive_failures,
            boost: a.ensemble.boost,
            modiste: a.modiste,
        }
    }
}

impl AcquisitionParams {
    pub fn to_config(&self) -> AcquisitionConfig {
        AcquisitionConfig {
            budget: self.budget,
            warmup: self.warmup,
            ensemble: EnsembleConfig { size: self.ensemble_size, resample: self.resample, boost: self.boost },
            batch_size: self.batch_size,
            refit_interval: self.refit_interval,
            action_cap: self.action_cap,
            checkpoint_every: self.checkpoint_every,
            max_consecutive_failures: self.max_consecutive_failures,
            modiste: self.modiste,
            ..AcquisitionConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardParams {
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams { lambda: 0.0, epsilon: DEFAULT_EPSILON }
    }
}

impl RewardParams {
    pub fn to_spec(&self) -> RewardSpec {
        let kind = if self.lambda == 0.0 { RewardKind::LogLikelihood } else { RewardKind::LogLikelihoodWithCardinalityPenalty };
        RewardSpec { kind, lambda: self.lambda, epsilon: self.epsilon }
    }
}

/// Optional λ sweep run after the main experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub lambdas: Vec<f64>,
    #[serde(default = "default_sweep_strategy")]
    pub strategy: String,
}

fn default_sweep_strategy() -> String {
    "mimic".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seeds: Vec<u64>,
    pub strategies: Vec<String>,
    pub output_dir: PathBuf,
    pub dataset: DataSpec,
    pub environment: EnvironmentSpec,
    pub acquisition: AcquisitionParams,
    pub reward: RewardParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepParams>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            seeds: vec![0, 1, 2, 3, 4],
            strategies: vec!["mimic".into(), "fcmts".into(), "random".into()],
            output_dir: PathBuf::from("runs"),
            dataset: DataSpec::default(),
            environment: EnvironmentSpec::default(),
            acquisition: AcquisitionParams::default(),
            reward: RewardParams::default(),
            sweep: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_owned();
            let field = match e.span() {
                Some(span) => field_at(text, span.start),
                None => "config".into(),
            };
            DissError::config(field, msg)
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DissError::config("config", e.to_string()))
    }

    /// Reads, parses and validates; relative paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = std::fs::read_to_string(path).map_err(|e| DissError::io(path, e))?;
        let cfg = Self::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate(&base)?;
        Ok((cfg, base))
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        self.strategies
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Method::parse(s).ok_or_else(|| {
                    let known: Vec<&str> = Method::ALL.iter().map(|m| m.key()).collect();
                    DissError::config(format!("strategies[{i}]"), format!("unknown strategy `{s}`; expected one of {}", known.join(", ")))
                })
            })
            .collect()
    }

    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(DissError::config("seeds", "at least one seed is required"));
        }
        if self.strategies.is_empty() {
            return Err(DissError::config("strategies", "at least one strategy is required"));
        }
        self.methods()?;
        if !(self.reward.lambda >= 0.0) || !self.reward.lambda.is_finite() {
            return Err(DissError::config("reward.lambda", format!("must be >= 0, got {}", self.reward.lambda)));
        }
        if !(self.reward.epsilon > 0.0 && self.reward.epsilon < 0.5) {
            return Err(DissError::config("reward.epsilon", "must lie in (0, 0.5)"));
        }
        self.acquisition.to_config().validate()?;
        self.dataset.validate(base_dir)?;
        let d = match self.dataset.source {
            crate::runner::DataSource::Csv => None,
            _ => Some(self.dataset.d),
        };
        self.environment.validate(d)?;
        if let Some(s) = &self.sweep {
            if s.lambdas.is_empty() {
                return Err(DissError::config("sweep.lambdas", "at least one λ is required"));
            }
            if let Some(l) = s.lambdas.iter().find(|l| !(**l >= 0.0)) {
                return Err(DissError::config("sweep.lambdas", format!("must be >= 0, got {l}")));
            }
            if Method::parse(&s.strategy).is_none() {
                return Err(DissError::config("sweep.strategy", format!("unknown strategy `{}`", s.strategy)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the resolved config, defaults included.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

/// Dotted key path of the TOML entry that contains byte `offset`.
fn field_at(text: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') && !t.starts_with("[[") {
            table = t.trim_matches(|c| c == '[' || c == ']').trim().to_owned();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            if !t.starts_with('#') {
                key = k.trim().trim_matches('"').to_owned();
            }
        }
        if offset < pos + line.len() {
            break;
        }
        pos += line.len();
    }
    match (table.is_empty(), key.is_empty()) {
        (true, true) => "config".into(),
        (true, false) => key,
        (false, true) => table,
        (false, false) => format!("{table}.{key}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ExperimentConfig::from_toml("name = \"x\"\n[acquisition]\nbudget = 600\n").unwrap();
        assert_eq!(cfg.acquisition.budget, 600);
        assert_eq!(cfg.acquisition.warmup, 500);
        assert_eq!(cfg.acquisition.boost.n_trees, 64);
    }

    #[test]
    fn unknown_names_point_at_field() {
        let cfg = ExperimentConfig::from_toml("strategies = [\"mimic\", \"nope\"]\n").unwrap();
        let err = cfg.validate(Path::new(".")).unwrap_err();
        assert!(matches!(&err, DissError::InvalidConfig { field, .. } if field == "strategies[1]"), "{err}");

        let err = ExperimentConfig::from_toml("[environment]\nkind = \"grumpy\"\n").unwrap_err();
        assert!(matches!(&err, DissError::InvalidConfig { field, .. } if field == "environment.kind"), "{err}");

        let err = ExperimentConfig::from_toml("[acquisition]\nbudgt = 5\n").unwrap_err();
        assert!(matches!(&err, DissError::InvalidConfig { field, .. } if field.starts_with("acquisition")), "{err}");
    }

    #[test]
    fn negative_lambda_rejected() {
        let cfg = ExperimentConfig::from_toml("[reward]\nlambda = -1.0\n").unwrap();
        let err = cfg.validate(Path::new(".")).unwrap_err();
        assert!(matches!(&err, DissError::InvalidConfig { field, .. } if field == "reward.lambda"));
    }

    #[test]
    fn missing_csv_named() {
        let cfg = ExperimentConfig::from_toml("[dataset]\nsource = \"csv\"\npath = \"nowhere/data.csv\"\n").unwrap();
        let err = cfg.validate(Path::new("/tmp")).unwrap_err().to_string();
        assert!(err.contains("dataset.path") && err.contains("nowhere/data.csv"), "{err}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seeds.push(9);
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
        assert_eq!(a.hash().unwrap().len(), 64);
    }
}
