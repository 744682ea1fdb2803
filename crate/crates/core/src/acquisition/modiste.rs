//! KNN-UCB baselines: exact-action KNN and a joint context-action KNN.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CandidateSource, ReplayBuffer, StrategyMeta};
use crate::data::Dataset;
use crate::domain::{argmax, Action, Observation, RewardEstimator};
use crate::error::ExpertError;
use crate::estimators::knn::{euclidean, k_nearest_mean};
use crate::runner::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModisteConfig {
    /// Neighbour count.
    pub k: usize,
    /// Weight of the action distance in the joint metric.
    pub nu: f64,
    /// Exploration coefficient c in c·√(log t / max(1, n)).
    pub bonus: f64,
}

impl Default for ModisteConfig {
    fn default() -> Self {
        ModisteConfig { k: 10, nu: 1.0, bonus: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModisteVariant {
    Knn,
    Uknn,
}

/// Mask bits followed by the option one-hot.
pub fn action_vector(action: &Action, n_options: usize) -> Vec<f64> {
    let mut v: Vec<f64> = action.mask.iter().map(|b| if b { 1.0 } else { 0.0 }).collect();
    v.extend((0..n_options).map(|o| if o == action.option { 1.0 } else { 0.0 }));
    v
}

/// ‖x − x'‖ + ν‖a − a'‖.
pub fn uknn_distance(x: &[f64], a: &[f64], x2: &[f64], a2: &[f64], nu: f64) -> f64 {
    euclidean(x, x2) + nu * euclidean(a, a2)
}

/// Mean reward of the k nearest entries taking exactly `action`, with the
/// number of neighbours used. An unseen action scores the buffer minimum.
pub fn modiste_knn_estimate(buffer: &[Observation], contexts: &Dataset, x: &[f64], action: &Action, k: usize) -> (f64, usize) {
    let mut matches: Vec<(f64, f64)> = buffer
        .iter()
        .filter(|o| o.action == *action)
        .map(|o| (euclidean(x, contexts.features(o.instance_index)), o.reward))
        .collect();
    match k_nearest_mean(&mut matches, k) {
        Some(hit) => hit,
        None => (buffer.iter().map(|o| o.reward).fold(f64::INFINITY, f64::min), 0),
    }
}

/// Mean reward of the k nearest entries under the joint context-action metric.
pub fn modiste_uknn_estimate(
    buffer: &[Observation],
    contexts: &Dataset,
    n_options: usize,
    x: &[f64],
    action: &Action,
    k: usize,
    nu: f64,
) -> (f64, usize) {
    let a = action_vector(action, n_options);
    let mut all: Vec<(f64, f64)> = buffer
        .iter()
        .map(|o| {
            let a2 = action_vector(&o.action, n_options);
            (uknn_distance(x, &a, contexts.features(o.instance_index), &a2, nu), o.reward)
        })
        .collect();
    k_nearest_mean(&mut all, k).unwrap_or((f64::NAN, 0))
}

/// Indexed snapshot of a buffer for repeated KNN scoring.
pub struct ModistePolicy<'a> {
    variant: ModisteVariant,
    cfg: ModisteConfig,
    n_options: usize,
    contexts: &'a Dataset,
    observations: &'a [Observation],
    action_vecs: Vec<Vec<f64>>,
    by_action: HashMap<&'a Action, Vec<usize>>,
    min_reward: f64,
}

impl<'a> ModistePolicy<'a> {
    pub fn new(variant: ModisteVariant, cfg: ModisteConfig, n_options: usize, contexts: &'a Dataset, observations: &'a [Observation]) -> Self {
        let mut by_action: HashMap<&Action, Vec<usize>> = HashMap::new();
        for (idx, o) in observations.iter().enumerate() {
            by_action.entry(&o.action).or_default().push(idx);
        }
        let action_vecs = match variant {
            ModisteVariant::Uknn => observations.iter().map(|o| action_vector(&o.action, n_options)).collect(),
            ModisteVariant::Knn => Vec::new(),
        };
        let min_reward = observations.iter().map(|o| o.reward).fold(f64::INFINITY, f64::min);
        ModistePolicy { variant, cfg, n_options, contexts, observations, action_vecs, by_action, min_reward }
    }

    /// KNN estimate and neighbour count, without exploration bonus.
    pub fn estimate_with_count(&self, x: &[f64], action: &Action) -> (f64, usize) {
        match self.variant {
            ModisteVariant::Knn => {
                let Some(rows) = self.by_action.get(action) else {
                    return (self.min_reward, 0);
                };
                let mut m: Vec<(f64, f64)> = rows
                    .iter()
                    .map(|&r| {
                        let o = &self.observations[r];
                        (euclidean(x, self.contexts.features(o.instance_index)), o.reward)
                    })
                    .collect();
                k_nearest_mean(&mut m, self.cfg.k).unwrap_or((self.min_reward, 0))
            }
            ModisteVariant::Uknn => {
                let a = action_vector(action, self.n_options);
                let mut all: Vec<(f64, f64)> = self
                    .observations
                    .iter()
                    .zip(&self.action_vecs)
                    .map(|(o, a2)| (uknn_distance(x, &a, self.contexts.features(o.instance_index), a2, self.cfg.nu), o.reward))
                    .collect();
                k_nearest_mean(&mut all, self.cfg.k).unwrap_or((self.min_reward, 0))
            }
        }
    }

    /// Estimate plus c·√(log t / max(1, n)).
    pub fn ucb(&self, x: &[f64], action: &Action, t: usize) -> (f64, usize) {
        let (value, n) = self.estimate_with_count(x, action);
        let log_t = (t.max(1) as f64).ln();
        (value + self.cfg.bonus * (log_t / n.max(1) as f64).sqrt(), n)
    }
}

impl RewardEstimator for ModistePolicy<'_> {
    fn estimate(&self, x: &[f64], action: &Action) -> f64 {
        self.estimate_with_count(x, action).0
    }
}

/// Uniform instance, then the candidate with the highest upper confidence score.
pub fn modiste_acquire_step<R: Rng + ?Sized>(
    buffer: &mut ReplayBuffer,
    variant: ModisteVariant,
    env: &Environment,
    cfg: &ModisteConfig,
    candidates: &CandidateSource,
    rng: &mut R,
) -> Result<(), ExpertError> {
    let i = rng.random_range(0..env.train.len());
    let cands = candidates.sample(rng);
    let t = buffer.len() + 1;
    let (action, score, matches) = {
        let policy = ModistePolicy::new(variant, *cfg, env.n_options, &env.train, buffer.observations());
        let x = env.train.features(i);
        let scored: Vec<(f64, usize)> = cands.par_iter().map(|a| policy.ucb(x, a, t)).collect();
        let values: Vec<f64> = scored.iter().map(|s| s.0).collect();
        let (best, score) = argmax(&values).expect("candidate set is never empty");
        (cands[best].clone(), score, scored[best].1)
    };
    let obs = env.query(i, &action)?;
    buffer.push(obs, StrategyMeta::Modiste { score, matches });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DecisionOutput, Instance, Mask};

    fn contexts(points: &[f64]) -> Dataset {
        let inst = points.iter().map(|&p| Instance::new(vec![p], Some(0))).collect();
        Dataset::new("ctx", vec!["x0".into()], inst).unwrap()
    }

    fn obs(i: usize, bits: &str, reward: f64) -> Observation {
        Observation {
            instance_index: i,
            action: Action::new(Mask::parse_bitstring(bits).unwrap(), 0),
            output: DecisionOutput::new(0.5),
            reward,
        }
    }

    #[test]
    fn knn_examples() {
        let ctx = contexts(&[0.1, 0.2, 9.0, 0.0]);
        let buf = vec![obs(0, "11", -1.0), obs(1, "11", -2.0), obs(2, "11", -6.0), obs(3, "01", -0.5)];
        let a = Action::new(Mask::parse_bitstring("11").unwrap(), 0);
        assert_eq!(modiste_knn_estimate(&buf, &ctx, &[0.0], &a, 2), (-1.5, 2));
        let unseen = Action::new(Mask::parse_bitstring("00").unwrap(), 0);
        assert_eq!(modiste_knn_estimate(&buf, &ctx, &[0.0], &unseen, 2), (-6.0, 0));
        let single = Action::new(Mask::parse_bitstring("01").unwrap(), 0);
        assert_eq!(modiste_knn_estimate(&buf, &ctx, &[5.0], &single, 10), (-0.5, 1));
        let policy = ModistePolicy::new(ModisteVariant::Knn, ModisteConfig { k: 2, ..Default::default() }, 1, &ctx, &buf);
        assert_eq!(policy.estimate_with_count(&[0.0], &a), (-1.5, 2));
        assert_eq!(policy.estimate_with_count(&[0.0], &unseen), (-6.0, 0));
    }

    #[test]
    fn uknn_examples() {
        let ctx = contexts(&[0.0, 0.3]);
        let buf = vec![obs(0, "00", -3.0), obs(1, "11", -0.2)];
        let q = Action::new(Mask::parse_bitstring("00").unwrap(), 0);
        assert_eq!(modiste_uknn_estimate(&buf, &ctx, 1, &[0.0], &q, 1, 1.0).0, -3.0);
        // nu = 0 ignores actions: x = 0.29 is nearest to the second entry
        assert_eq!(modiste_uknn_estimate(&buf, &ctx, 1, &[0.29], &q, 1, 0.0).0, -0.2);
        // context gap 0.29 < nu · action gap → the action-matching entry wins
        assert_eq!(modiste_uknn_estimate(&buf, &ctx, 1, &[0.29], &q, 1, 100.0).0, -3.0);
    }

    #[test]
    fn bonus_shrinks_with_matches() {
        let ctx = contexts(&[0.0; 4]);
        let buf = vec![obs(0, "1", -1.0), obs(1, "1", -1.0), obs(2, "1", -1.0), obs(3, "0", -1.0)];
        let p = ModistePolicy::new(ModisteVariant::Knn, ModisteConfig::default(), 1, &ctx, &buf);
        let (hi, _) = p.ucb(&[0.0], &Action::new(Mask::parse_bitstring("0").unwrap(), 0), 10);
        let (lo, _) = p.ucb(&[0.0], &Action::new(Mask::parse_bitstring("1").unwrap(), 0), 10);
        assert!(hi > lo);
        assert!((hi - (-1.0 + 10f64.ln().sqrt())).abs() < 1e-12);
    }
}
