//! Cognitive-bias wrappers around a base expert.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::DecisionMaker;
use crate::data::Dataset;
use crate::domain::{DecisionOutput, Mask, DEFAULT_EPSILON};
use crate::error::{DissError, ExpertError, Result};
use crate::estimators::logistic::{logit, sigmoid, LogisticConfig, LogisticModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasKind {
    Overload,
    RiskAverse,
    Simplicity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasConfig {
    pub kind: BiasKind,
    #[serde(default = "default_bias_level")]
    pub bias_level: f64,
    #[serde(default = "default_min_temp")]
    pub min_temp: f64,
    #[serde(default = "default_bias_mult")]
    pub bias_mult: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poison_feature_index: Option<usize>,
}

fn default_bias_level() -> f64 {
    0.5
}
fn default_min_temp() -> f64 {
    1.0
}
fn default_bias_mult() -> f64 {
    5.0
}

impl BiasConfig {
    pub fn overload(bias_level: f64, min_temp: f64, bias_mult: f64) -> Self {
        BiasConfig { kind: BiasKind::Overload, bias_level, min_temp, bias_mult, poison_feature_index: None }
    }

    pub fn risk_averse(bias_level: f64) -> Self {
        BiasConfig { kind: BiasKind::RiskAverse, bias_level, ..BiasConfig::overload(0.0, 1.0, 5.0) }
    }

    pub fn simplicity(bias_level: f64, poison_feature_index: usize) -> Self {
        BiasConfig {
            kind: BiasKind::Simplicity,
            bias_level,
            poison_feature_index: Some(poison_feature_index),
            ..BiasConfig::overload(0.0, 1.0, 5.0)
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.bias_level) {
            return Err(DissError::config("bias.bias_level", "must lie in [0, 1]"));
        }
        if self.min_temp < 0.0 || self.bias_mult < 0.0 {
            return Err(DissError::config("bias", "min_temp and bias_mult must be non-negative"));
        }
        if self.kind == BiasKind::Simplicity {
            match self.poison_feature_index {
                Some(j) if j < d => {}
                Some(j) => {
                    return Err(DissError::config("bias.poison_feature_index", format!("{j} out of range for d={d}")))
                }
                None => return Err(DissError::config("bias.poison_feature_index", "required for simplicity bias")),
            }
        }
        Ok(())
    }
}

/// T(b) = min_temp + bias_level · bias_mult · ‖b‖₂ / √d.
pub fn overload_temperature(mask: &Mask, bias_level: f64, min_temp: f64, bias_mult: f64) -> f64 {
    let d = mask.len().max(1) as f64;
    min_temp + bias_level * bias_mult * mask.l2_norm() / d.sqrt()
}

/// Two-logit softmax at temperature T(b) over (log(1−η), log η).
pub fn apply_overload(eta: f64, mask: &Mask, bias_level: f64, min_temp: f64, bias_mult: f64) -> f64 {
    let eta = eta.clamp(DEFAULT_EPSILON, 1.0 - DEFAULT_EPSILON);
    let t = overload_temperature(mask, bias_level, min_temp, bias_mult);
    if t <= 0.0 {
        // zero temperature degenerates to a hard argmax
        return match eta.partial_cmp(&0.5) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => 0.0,
            _ => 0.5,
        };
    }
    sigmoid(logit(eta) / t)
}

/// (1 − α)·η + α.
pub fn apply_risk_aversion(eta: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * eta + alpha
}

/// (1 − α)·η + α·g(x_j) when feature j is shown, otherwise η.
pub fn apply_simplicity_bias(eta: f64, poison_prob: f64, mask: &Mask, poison_index: usize, alpha: f64) -> f64 {
    if mask.get(poison_index) {
        (1.0 - alpha) * eta + alpha * poison_prob
    } else {
        eta
    }
}

/// Univariate logistic classifier g on a single feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonModel {
    pub feature: usize,
    pub model: LogisticModel,
}

impl PoisonModel {
    pub fn fit(train: &Dataset, feature: usize) -> Self {
        let rows: Vec<[f64; 1]> = train.instances.iter().map(|i| [i.features[feature]]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let y: Vec<f64> = train.labels().into_iter().map(f64::from).collect();
        let cfg = LogisticConfig { max_iter: 2000, ..Default::default() };
        PoisonModel { feature, model: LogisticModel::fit(&refs, &y, &cfg) }
    }

    pub fn prob(&self, value: f64) -> f64 {
        self.model.predict(&[value])
    }
}

/// A base expert whose output passes through one bias transform.
pub struct BiasedExpert {
    base: Arc<dyn DecisionMaker>,
    cfg: BiasConfig,
    poison: Option<PoisonModel>,
}

impl BiasedExpert {
    /// `train` is the base expert's training data, used to fit the poison
    /// model for the simplicity bias.
    pub fn new(base: Arc<dyn DecisionMaker>, cfg: BiasConfig, train: &Dataset) -> Result<Self> {
        cfg.validate(base.dim())?;
        let poison = match (cfg.kind, cfg.poison_feature_index) {
            (BiasKind::Simplicity, Some(j)) => Some(PoisonModel::fit(train, j)),
            _ => None,
        };
        Ok(BiasedExpert { base, cfg, poison })
    }

    pub fn config(&self) -> &BiasConfig {
        &self.cfg
    }

    pub fn poison_model(&self) -> Option<&PoisonModel> {
        self.poison.as_ref()
    }

    pub fn transform(&self, eta: f64, x_masked: &[f64], mask: &Mask) -> f64 {
        let c = &self.cfg;
        let out = match c.kind {
            BiasKind::Overload => apply_overload(eta, mask, c.bias_level, c.min_temp, c.bias_mult),
            BiasKind::RiskAverse => apply_risk_aversion(eta, c.bias_level),
            BiasKind::Simplicity => {
                let g = self.poison.as_ref().expect("simplicity bias has a poison model");
                apply_simplicity_bias(eta, g.prob(x_masked[g.feature]), mask, g.feature, c.bias_level)
            }
        };
        out.clamp(0.0, 1.0)
    }
}

impl DecisionMaker for BiasedExpert {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn n_options(&self) -> usize {
        self.base.n_options()
    }

    fn decide(&self, x_masked: &[f64], mask: &Mask, option: usize) -> Result<DecisionOutput, ExpertError> {
        let mut out = self.base.decide(x_masked, mask, option)?;
        out.prob_positive = self.transform(out.prob_positive, x_masked, mask);
        Ok(out)
    }
}
