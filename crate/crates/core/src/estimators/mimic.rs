//! Mimic-structured reward estimation.
//!
//! The expected reward of an action factors into a label model p̂(y | x),
//! fitted once on the supervised dataset, and a mimic model M̂(x ⊙ b, o) of
//! the decision-maker, fitted on the acquired observations. The two combine
//! through the known reward: Σ_y p̂(y | x) · r(y, M̂(x ⊙ b, o)).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::boosting::{BoostedTrees, Loss};
use super::ensemble::{fit_tree_ensemble, BootstrapEnsemble, EnsembleConfig, EnsembleEstimator, Head};
use super::{InputEncoder, Matrix};
use crate::data::Dataset;
use crate::domain::{Action, Mask, Observation, RewardSpec};
use crate::error::Result;

/// p · r(1, η) + (1 − p) · r(0, η) for label probability `p` and predicted
/// decision probability `eta`.
pub fn expected_reward(spec: &RewardSpec, p: f64, eta: f64, mask: &Mask) -> f64 {
    p * spec.log_likelihood(1, eta) + (1.0 - p) * spec.log_likelihood(0, eta) - spec.penalty(mask)
}

/// Classifier ensemble for p̂(y = 1 | x). Only ever sees the supervised dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModel {
    pub ensemble: BootstrapEnsemble<BoostedTrees>,
    pub epsilon: f64,
}

impl LabelModel {
    pub fn fit(dataset: &Dataset, cfg: &EnsembleConfig, epsilon: f64, seed: u64) -> Result<Self> {
        let x = Matrix::from_rows(dataset.instances.iter().map(|i| i.features.clone()).collect());
        let y: Vec<f64> = dataset.labels().into_iter().map(f64::from).collect();
        let ensemble = fit_tree_ensemble(&x, &y, Loss::Logistic, cfg, seed)?;
        Ok(LabelModel { ensemble, epsilon })
    }

    /// Member probability or mean of member probabilities, clamped to [ε, 1−ε].
    pub fn prob(&self, x: &[f64], head: Head) -> f64 {
        self.ensemble.predict(head, x).clamp(self.epsilon, 1.0 - self.epsilon)
    }
}

/// Soft-target logistic boosting of the observed decision probabilities η.
pub fn fit_mimic_model(
    observations: &[Observation],
    dataset: &Dataset,
    encoder: InputEncoder,
    cfg: &EnsembleConfig,
    seed: u64,
) -> Result<BootstrapEnsemble<BoostedTrees>> {
    let mut x = Matrix::with_cols(encoder.width());
    let mut buf = Vec::with_capacity(encoder.width());
    for o in observations {
        encoder.encode_into(dataset.features(o.instance_index), &o.action, &mut buf);
        x.push_row(&buf);
    }
    let eta: Vec<f64> = observations.iter().map(|o| o.output.prob_positive).collect();
    fit_tree_ensemble(&x, &eta, Loss::Logistic, cfg, seed)
}

#[derive(Debug, Clone)]
pub struct MimicEstimator {
    pub label_model: Arc<LabelModel>,
    pub mimic_model: BootstrapEnsemble<BoostedTrees>,
    pub encoder: InputEncoder,
    pub reward: RewardSpec,
}

impl MimicEstimator {
    pub fn fit(
        label_model: Arc<LabelModel>,
        observations: &[Observation],
        dataset: &Dataset,
        n_options: usize,
        cfg: &EnsembleConfig,
        reward: RewardSpec,
        seed: u64,
    ) -> Result<Self> {
        let encoder = InputEncoder::masked(dataset.dim(), n_options);
        let mimic_model = fit_mimic_model(observations, dataset, encoder, cfg, seed)?;
        Ok(MimicEstimator { label_model, mimic_model, encoder, reward })
    }

    /// M̂(x ⊙ b, o), clamped like the label model.
    pub fn mimic_prob(&self, x: &[f64], action: &Action, head: Head) -> f64 {
        let eps = self.reward.epsilon;
        self.mimic_model.predict(head, &self.encoder.encode(x, action)).clamp(eps, 1.0 - eps)
    }

    pub fn estimate(&self, x: &[f64], action: &Action, head: Head) -> f64 {
        let p = self.label_model.prob(x, head);
        expected_reward(&self.reward, p, self.mimic_prob(x, action, head), &action.mask)
    }
}

impl EnsembleEstimator for MimicEstimator {
    fn ensemble_size(&self) -> usize {
        self.mimic_model.len()
    }

    fn score(&self, x: &[f64], actions: &[Action], head: Head) -> Vec<f64> {
        let p = self.label_model.prob(x, head);
        let eps = self.reward.epsilon;
        let mut buf = Vec::with_capacity(self.encoder.width());
        actions
            .iter()
            .map(|a| {
                self.encoder.encode_into(x, a, &mut buf);
                let eta = self.mimic_model.predict(head, &buf).clamp(eps, 1.0 - eps);
                expected_reward(&self.reward, p, eta, &a.mask)
            })
            .collect()
    }

    fn score_pair(&self, x: &[f64], actions: &[Action], member: usize) -> (Vec<f64>, Vec<f64>) {
        let p_mean = self.label_model.prob(x, Head::Mean);
        let p_draw = self.label_model.prob(x, Head::Member(member));
        let eps = self.reward.epsilon;
        let mut buf = Vec::with_capacity(self.encoder.width());
        actions
            .iter()
            .map(|a| {
                self.encoder.encode_into(x, a, &mut buf);
                let (m, d) = self.mimic_model.predict_pair(member, &buf);
                (
                    expected_reward(&self.reward, p_mean, m.clamp(eps, 1.0 - eps), &a.mask),
                    expected_reward(&self.reward, p_draw, d.clamp(eps, 1.0 - eps), &a.mask),
                )
            })
            .unzip()
    }
}
