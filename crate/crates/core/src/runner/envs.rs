//! Environment assembly from declarative dataset and expert specs.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Environment;
use crate::data::{
    kmeans, load_csv, make_cluster_mixture, make_synthetic, split, Dataset, LabelColumn, MixtureSpec, SplitSpec, Standardizer,
    SyntheticSpec,
};
use crate::domain::{DecisionOutput, Mask, RewardSpec};
use crate::error::{DissError, ExpertError, Result};
use crate::experts::{
    BiasConfig, BiasKind, BiasedExpert, DecisionMaker, ExpertPool, HttpBackend, LlmExpert, LlmExpertConfig, LocalLinearExpert,
    MockBackend, NwExpert,
};

/// Environment variable holding the chat endpoint's API key.
pub const API_KEY_ENV: &str = "DISS_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv,
    Synthetic,
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub source: DataSource,
    /// CSV file; relative paths resolve against the config file's directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_column: Option<LabelColumn>,
    pub has_header: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rows: Option<usize>,
    pub n: usize,
    pub d: usize,
    pub informative: Vec<usize>,
    pub steepness: f64,
    pub clusters: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub split_seed: u64,
    pub standardize: bool,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            source: DataSource::Synthetic,
            path: None,
            label_column: None,
            has_header: true,
            max_rows: None,
            n: 3000,
            d: 8,
            informative: vec![0, 1, 2],
            steepness: 2.0,
            clusters: 2,
            seed: 0,
            test_fraction: 0.25,
            split_seed: 0,
            standardize: true,
        }
    }
}

impl DataSpec {
    pub fn validate(&self, base_dir: &Path) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(DissError::config("dataset.test_fraction", "must lie strictly between 0 and 1"));
        }
        match self.source {
            DataSource::Csv => {
                let path = self.path.as_ref().ok_or_else(|| DissError::config("dataset.path", "required for csv source"))?;
                let full = base_dir.join(path);
                if !full.is_file() {
                    return Err(DissError::config("dataset.path", format!("file not found: {}", full.display())));
                }
            }
            DataSource::Synthetic | DataSource::Mixture => {
                if self.n < 4 || self.d == 0 {
                    return Err(DissError::config("dataset.n", "synthetic data needs n >= 4 and d >= 1"));
                }
                if let Some(j) = self.informative.iter().find(|&&j| j >= self.d) {
                    return Err(DissError::config("dataset.informative", format!("feature {j} out of range for d={}", self.d)));
                }
                if self.source == DataSource::Mixture && (self.d < 2 || self.clusters == 0) {
                    return Err(DissError::config("dataset.clusters", "mixture needs d >= 2 and at least one cluster"));
                }
            }
        }
        Ok(())
    }

    pub fn load(&self, base_dir: &Path) -> Result<Dataset> {
        let ds = match self.source {
            DataSource::Csv => {
                let path = base_dir.join(self.path.as_ref().ok_or_else(|| DissError::config("dataset.path", "required"))?);
                let label = self.label_column.clone().unwrap_or(LabelColumn::Name("label".into()));
                load_csv(path, &label, self.has_header)?
            }
            DataSource::Synthetic => make_synthetic(&SyntheticSpec {
                n: self.n,
                d: self.d,
                seed: self.seed,
                informative: self.informative.clone(),
                steepness: self.steepness,
            })?,
            DataSource::Mixture => make_cluster_mixture(&MixtureSpec::new(self.n, self.d, self.clusters, self.seed))?.0,
        };
        Ok(match self.max_rows {
            Some(cap) => ds.subsample(cap, self.seed),
            None => ds,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    /// Unbiased Nadaraya–Watson expert.
    Nw,
    Overload,
    RiskAverse,
    Simplicity,
    MultiExpert,
    LocalLinear,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub kind: EnvKind,
    pub bandwidth: f64,
    pub bias_level: f64,
    pub min_temp: f64,
    pub bias_mult: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poison_feature_index: Option<usize>,
    /// K-Means clusters for the multi-expert pool.
    pub clusters: usize,
    pub k_neighbors: usize,
    pub ridge: f64,
    /// Upper bound on evaluated test rows (defaults to 100 for chat experts).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_cap: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmExpertConfig>,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        EnvironmentSpec {
            kind: EnvKind::Overload,
            bandwidth: 1.0,
            bias_level: 0.5,
            min_temp: 1.0,
            bias_mult: 5.0,
            poison_feature_index: None,
            clusters: 4,
            k_neighbors: 32,
            ridge: 1e-2,
            eval_cap: None,
            llm: None,
        }
    }
}

impl EnvironmentSpec {
    pub fn bias_config(&self) -> Option<BiasConfig> {
        let kind = match self.kind {
            EnvKind::Overload => BiasKind::Overload,
            EnvKind::RiskAverse => BiasKind::RiskAverse,
            EnvKind::Simplicity => BiasKind::Simplicity,
            _ => return None,
        };
        Some(BiasConfig {
            kind,
            bias_level: self.bias_level,
            min_temp: self.min_temp,
            bias_mult: self.bias_mult,
            poison_feature_index: self.poison_feature_index,
        })
    }

    pub fn validate(&self, d: Option<usize>) -> Result<()> {
        if !(self.bandwidth > 0.0) {
            return Err(DissError::config("environment.bandwidth", "must be positive"));
        }
        if let Some(b) = self.bias_config() {
            b.validate(d.unwrap_or(usize::MAX)).map_err(|e| match e {
                DissError::InvalidConfig { field, message } => {
                    DissError::config(field.replace("bias.", "environment."), message)
                }
                other => other,
            })?;
        }
        match self.kind {
            EnvKind::MultiExpert if self.clusters == 0 => {
                Err(DissError::config("environment.clusters", "must be at least 1"))
            }
            EnvKind::LocalLinear if self.k_neighbors < 2 || self.ridge < 0.0 => {
                Err(DissError::config("environment.k_neighbors", "need k_neighbors >= 2 and ridge >= 0"))
            }
            EnvKind::Llm => match &self.llm {
                None => Err(DissError::config("environment.llm", "required for kind = \"llm\"")),
                Some(c) => c.validate(),
            },
            _ => Ok(()),
        }
    }
}

/// Undoes standardization before the wrapped expert sees the values, so
/// prompts show the original units. Hidden features stay 0.
struct RawUnits {
    inner: Arc<dyn DecisionMaker>,
    scaler: Standardizer,
}

impl DecisionMaker for RawUnits {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn n_options(&self) -> usize {
        self.inner.n_options()
    }

    fn decide(&self, x_masked: &[f64], mask: &Mask, option: usize) -> std::result::Result<DecisionOutput, ExpertError> {
        let raw: Vec<f64> = x_masked
            .iter()
            .enumerate()
            .map(|(j, &v)| if mask.get(j) { v * self.scaler.std[j] + self.scaler.mean[j] } else { 0.0 })
            .collect();
        self.inner.decide(&raw, mask, option)
    }
}

/// Loads and splits the data, standardizes with training statistics and
/// builds the configured decision-maker.
pub fn build_environment(data: &DataSpec, spec: &EnvironmentSpec, reward: RewardSpec, base_dir: &Path) -> Result<Environment> {
    data.validate(base_dir)?;
    let full = data.load(base_dir)?;
    spec.validate(Some(full.dim()))?;
    let (mut train, mut test) = split(&full, SplitSpec { test_fraction: data.test_fraction, seed: data.split_seed });
    let mut scaler = None;
    if data.standardize {
        let s = Standardizer::fit(&train);
        train = s.apply(&train);
        test = s.apply(&test);
        scaler = Some(s);
    }
    let eval_cap = spec.eval_cap.or((spec.kind == EnvKind::Llm).then_some(100));
    if let Some(cap) = eval_cap {
        test = test.subsample(cap, data.split_seed);
    }

    let mut routing = None;
    let expert: Arc<dyn DecisionMaker> = match spec.kind {
        EnvKind::Nw => Arc::new(NwExpert::new(&train, spec.bandwidth)?),
        EnvKind::Overload | EnvKind::RiskAverse | EnvKind::Simplicity => {
            let base: Arc<dyn DecisionMaker> = Arc::new(NwExpert::new(&train, spec.bandwidth)?);
            let cfg = spec.bias_config().expect("bias kinds have a bias config");
            Arc::new(BiasedExpert::new(base, cfg, &train)?)
        }
        EnvKind::MultiExpert => {
            let clustering = kmeans(&train, spec.clusters, data.seed, 100)?;
            let pool = ExpertPool::from_clustering(&train, &clustering, spec.bandwidth)?;
            routing = Some(clustering);
            Arc::new(pool)
        }
        EnvKind::LocalLinear => Arc::new(LocalLinearExpert::new(&train, spec.k_neighbors, spec.ridge)?),
        EnvKind::Llm => {
            let cfg = spec.llm.clone().expect("validated above");
            let backend: Box<dyn crate::experts::ChatBackend> = match &cfg.mock_reply {
                Some(reply) => Box::new(MockBackend::fixed(reply.clone())),
                None => Box::new(HttpBackend::new(
                    cfg.endpoint_url.clone(),
                    std::time::Duration::from_secs(cfg.timeout_secs),
                    std::env::var(API_KEY_ENV).ok(),
                )),
            };
            let llm: Arc<dyn DecisionMaker> = Arc::new(LlmExpert::new(cfg, train.feature_names.clone(), backend)?);
            match scaler {
                Some(s) => Arc::new(RawUnits { inner: llm, scaler: s }),
                None => llm,
            }
        }
    };
    let name = format!("{}-{}", train.name, serde_json::to_value(spec.kind)?.as_str().unwrap_or("env"));
    let mut env = Environment::new(name, train, test, expert, reward)?;
    env.routing = routing;
    Ok(env)
}
