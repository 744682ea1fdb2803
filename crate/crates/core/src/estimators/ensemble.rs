use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::boosting::{fit_boosted_trees, BoostConfig, BoostedTrees, Loss};
use super::{InputEncoder, Matrix};
use crate::data::Dataset;
use crate::domain::{Action, Observation, RewardEstimator};
use crate::error::{DissError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    /// Number of members C.
    pub size: usize,
    /// Fit each member on a with-replacement resample; otherwise every member
    /// sees the full set.
    pub resample: bool,
    pub boost: BoostConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { size: 2, resample: true, boost: BoostConfig::default() }
    }
}

/// Which part of an ensemble answers a query: one member (a posterior draw)
/// or the member average (the posterior mean).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Member(usize),
    Mean,
}

/// C index multisets of size `n` drawn with replacement (or identity lists).
pub fn bootstrap_indices(n: usize, c: usize, resample: bool, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..c)
        .map(|_| if resample { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapEnsemble<M> {
    pub members: Vec<M>,
    pub seed: u64,
}

impl<M: Send> BootstrapEnsemble<M> {
    /// Fits one member per resample of `0..n`. Members are fitted in parallel;
    /// the result depends only on the data, `cfg` and `seed`.
    pub fn fit<F>(n: usize, size: usize, resample: bool, seed: u64, fit_member: F) -> Result<Self>
    where
        F: Fn(&[usize]) -> Result<M> + Sync,
    {
        if n == 0 {
            return Err(DissError::EmptySamples);
        }
        let sets = bootstrap_indices(n, size.max(1), resample, seed);
        let members = sets.par_iter().map(|idx| fit_member(idx)).collect::<Result<Vec<M>>>()?;
        Ok(BootstrapEnsemble { members, seed })
    }
}

impl<M> BootstrapEnsemble<M> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Uniform draw of a member index.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.members.len())
    }

    /// Arithmetic mean of `f` over members.
    pub fn mean_by(&self, f: impl Fn(&M) -> f64) -> f64 {
        self.members.iter().map(f).sum::<f64>() / self.members.len() as f64
    }

    /// Member output for `Head::Member(i)` (index taken modulo C) or the mean.
    pub fn eval(&self, head: Head, f: impl Fn(&M) -> f64) -> f64 {
        match head {
            Head::Member(i) => f(&self.members[i % self.members.len()]),
            Head::Mean => self.mean_by(f),
        }
    }
}

impl BootstrapEnsemble<BoostedTrees> {
    pub fn predict(&self, head: Head, row: &[f64]) -> f64 {
        self.eval(head, |m| m.predict(row))
    }

    /// (mean, member) in one pass over the members.
    pub fn predict_pair(&self, member: usize, row: &[f64]) -> (f64, f64) {
        let mut sum = 0.0;
        let mut drawn = 0.0;
        let pick = member % self.members.len();
        for (k, m) in self.members.iter().enumerate() {
            let v = m.predict(row);
            if k == pick {
                drawn = v;
            }
            sum += v;
        }
        (sum / self.members.len() as f64, drawn)
    }
}

/// Fits a boosted-tree ensemble on rows/targets with bootstrap resampling.
pub fn fit_tree_ensemble(
    x: &Matrix,
    y: &[f64],
    loss: Loss,
    cfg: &EnsembleConfig,
    seed: u64,
) -> Result<BootstrapEnsemble<BoostedTrees>> {
    BootstrapEnsemble::fit(x.rows(), cfg.size, cfg.resample, seed, |idx| {
        let mut sub = Matrix::with_cols(x.cols());
        let mut t = Vec::with_capacity(idx.len());
        for &i in idx {
            sub.push_row(x.row(i));
            t.push(y[i]);
        }
        fit_boosted_trees(&sub, &t, loss, &cfg.boost)
    })
}

/// Rewards regressed directly on encoded (x, b, o).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlainEstimator {
    pub ensemble: BootstrapEnsemble<BoostedTrees>,
    pub encoder: InputEncoder,
}

impl PlainEstimator {
    /// Fits on the observations' encoded inputs and rewards.
    pub fn fit(
        observations: &[Observation],
        dataset: &Dataset,
        encoder: InputEncoder,
        cfg: &EnsembleConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut x = Matrix::with_cols(encoder.width());
        let mut buf = Vec::with_capacity(encoder.width());
        for o in observations {
            encoder.encode_into(dataset.features(o.instance_index), &o.action, &mut buf);
            x.push_row(&buf);
        }
        let y: Vec<f64> = observations.iter().map(|o| o.reward).collect();
        let ensemble = fit_tree_ensemble(&x, &y, Loss::Squared, cfg, seed)?;
        Ok(PlainEstimator { ensemble, encoder })
    }

    pub fn estimate(&self, x: &[f64], action: &Action, head: Head) -> f64 {
        self.ensemble.predict(head, &self.encoder.encode(x, action))
    }
}

/// A fitted model exposing member draws and the member mean.
pub trait EnsembleEstimator: Sync {
    fn ensemble_size(&self) -> usize;

    fn score(&self, x: &[f64], actions: &[Action], head: Head) -> Vec<f64>;

    /// Mean-head and member-head scores together.
    fn score_pair(&self, x: &[f64], actions: &[Action], member: usize) -> (Vec<f64>, Vec<f64>) {
        (self.score(x, actions, Head::Mean), self.score(x, actions, Head::Member(member)))
    }

    fn view(&self, head: Head) -> HeadView<'_, Self>
    where
        Self: Sized,
    {
        HeadView { estimator: self, head }
    }
}

impl EnsembleEstimator for PlainEstimator {
    fn ensemble_size(&self) -> usize {
        self.ensemble.len()
    }

    fn score(&self, x: &[f64], actions: &[Action], head: Head) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.encoder.width());
        actions
            .iter()
            .map(|a| {
                self.encoder.encode_into(x, a, &mut buf);
                self.ensemble.predict(head, &buf)
            })
            .collect()
    }

    fn score_pair(&self, x: &[f64], actions: &[Action], member: usize) -> (Vec<f64>, Vec<f64>) {
        let mut buf = Vec::with_capacity(self.encoder.width());
        actions
            .iter()
            .map(|a| {
                self.encoder.encode_into(x, a, &mut buf);
                self.ensemble.predict_pair(member, &buf)
            })
            .unzip()
    }
}

/// Adapts an ensemble estimator at a fixed head to [`RewardEstimator`].
pub struct HeadView<'a, E: ?Sized> {
    pub estimator: &'a E,
    pub head: Head,
}

impl<E: EnsembleEstimator + ?Sized> RewardEstimator for HeadView<'_, E> {
    fn estimate(&self, x: &[f64], action: &Action) -> f64 {
        self.estimator.score(x, std::slice::from_ref(action), self.head)[0]
    }

    fn estimate_many(&self, x: &[f64], actions: &[Action]) -> Vec<f64> {
        self.estimator.score(x, actions, self.head)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DecisionOutput, Instance, Mask};
    use rand_distr::{Distribution, StandardNormal};

    fn toy_dataset(n: usize) -> Dataset {
        let inst = (0..n).map(|i| Instance::new(vec![i as f64 / n as f64], Some((i % 2) as u8))).collect();
        Dataset::new("toy", vec!["x0".into()], inst).unwrap()
    }

    fn obs(i: usize, bit: bool, reward: f64) -> Observation {
        Observation {
            instance_index: i,
            action: Action::new(Mask::from_bools(&[bit]), 0),
            output: DecisionOutput::new(0.5),
            reward,
        }
    }

    #[test]
    fn constant_rewards_survive_resampling() {
        let ds = toy_dataset(20);
        let o: Vec<_> = (0..20).map(|i| obs(i, i % 3 == 0, -0.4)).collect();
        let est = PlainEstimator::fit(&o, &ds, InputEncoder::raw(1, 1), &EnsembleConfig { size: 4, ..Default::default() }, 3).unwrap();
        for m in 0..4 {
            for i in 0..20 {
                let a = Action::new(Mask::from_bools(&[i % 2 == 0]), 0);
                assert!((est.estimate(ds.features(i), &a, Head::Member(m)) + 0.4).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_observation_mean_equals_member() {
        let ds = toy_dataset(5);
        let o = vec![obs(2, true, -1.25)];
        let est = PlainEstimator::fit(&o, &ds, InputEncoder::raw(1, 1), &EnsembleConfig { size: 1, ..Default::default() }, 0).unwrap();
        let a = Action::new(Mask::from_bools(&[true]), 0);
        assert_eq!(est.estimate(&[0.3], &a, Head::Mean), est.estimate(&[0.3], &a, Head::Member(0)));
    }

    #[test]
    fn draws_are_uniform_and_reproducible() {
        let ens = BootstrapEnsemble { members: vec![(); 4], seed: 0 };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 4];
        let draws: Vec<usize> = (0..10_000).map(|_| ens.draw(&mut rng)).collect();
        draws.iter().for_each(|&d| counts[d] += 1);
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.02);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(draws, (0..10_000).map(|_| ens.draw(&mut rng)).collect::<Vec<_>>());
        let one = BootstrapEnsemble { members: vec![()], seed: 0 };
        assert!((0..100).all(|_| one.draw(&mut rng) == 0));
    }

    #[test]
    fn mean_examples() {
        let ens = BootstrapEnsemble { members: vec![1.0, 3.0], seed: 0 };
        assert_eq!(ens.mean_by(|m| *m), 2.0);
        assert_eq!(ens.eval(Head::Member(1), |m| *m), 3.0);
    }

    fn member_spread(n: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 2.0 * x + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let x = Matrix::from_rows(xs.iter().map(|&v| vec![v]).collect());
        let cfg = EnsembleConfig { size: 16, ..Default::default() };
        let ens = fit_tree_ensemble(&x, &ys, Loss::Squared, &cfg, 9).unwrap();
        let probes = [-0.8, -0.4, 0.0, 0.4, 0.8];
        probes
            .iter()
            .map(|&p| {
                let preds: Vec<f64> = ens.members.iter().map(|m| m.predict(&[p])).collect();
                let mu = preds.iter().sum::<f64>() / preds.len() as f64;
                (preds.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / preds.len() as f64).sqrt()
            })
            .sum::<f64>()
            / probes.len() as f64
    }

    #[test]
    fn member_spread_shrinks_with_data() {
        let small = member_spread(50);
        let large = member_spread(500);
        assert!(small > 0.0 && large > 0.0);
        assert!(large < small, "spread at 500 ({large}) should be below spread at 50 ({small})");
    }

    #[test]
    fn identical_resamples_give_identical_members() {
        let x = Matrix::from_rows((0..30).map(|i| vec![i as f64]).collect());
        let y: Vec<f64> = (0..30).map(|i| (i as f64).sqrt()).collect();
        let cfg = EnsembleConfig { size: 3, resample: false, ..Default::default() };
        let ens = fit_tree_ensemble(&x, &y, Loss::Squared, &cfg, 1).unwrap();
        assert_eq!(ens.members[0], ens.members[1]);
        assert_eq!(ens.members[1], ens.members[2]);
    }
}
