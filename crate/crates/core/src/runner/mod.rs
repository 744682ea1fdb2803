//! Experiment orchestration: environments, held-out evaluation, learning
//! curves, λ sweeps and multi-seed aggregation.

pub mod envs;
pub mod report;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    run_acquisition, AcquisitionConfig, CandidateSource, EstimatorFactory, EstimatorKind, ModistePolicy, ModisteVariant,
    ReplayBuffer, Strategy,
};
use crate::data::{Clustering, Dataset};
use crate::domain::{compute_reward, Action, DecisionOutput, Mask, Observation, RewardEstimator, RewardSpec};
use crate::error::{DissError, ExpertError, Result};
use crate::estimators::ensemble::{EnsembleEstimator, Head};
use crate::estimators::MimicEstimator;
use crate::experts::DecisionMaker;

pub use envs::{build_environment, DataSource, DataSpec, EnvKind, EnvironmentSpec};
pub use report::{aggregate, curve_rows, read_curves_csv, write_curves_csv, AggregatePoint, CurveRow};

/// Dataset split, decision-maker and reward under which strategies compete.
#[derive(Clone)]
pub struct Environment {
    pub name: String,
    pub train: Dataset,
    pub test: Dataset,
    pub expert: Arc<dyn DecisionMaker>,
    pub reward: RewardSpec,
    pub n_options: usize,
    /// Clustering behind a multi-expert pool; option j serves cluster j.
    pub routing: Option<Clustering>,
}

impl std::fmt::Debug for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Environment")
            .field("name", &self.name)
            .field("train", &self.train.len())
            .field("test", &self.test.len())
            .field("d", &self.train.dim())
            .field("n_options", &self.n_options)
            .finish()
    }
}

impl Environment {
    pub fn new(name: impl Into<String>, train: Dataset, test: Dataset, expert: Arc<dyn DecisionMaker>, reward: RewardSpec) -> Result<Self> {
        if train.is_empty() || test.is_empty() {
            return Err(DissError::EmptyDataset);
        }
        if expert.dim() != train.dim() || test.dim() != train.dim() {
            return Err(DissError::config(
                "environment",
                format!("expert expects d={} but data has d={}", expert.dim(), train.dim()),
            ));
        }
        let n_options = expert.n_options();
        Ok(Environment { name: name.into(), train, test, expert, reward, n_options, routing: None })
    }

    pub fn with_reward(&self, reward: RewardSpec) -> Self {
        Environment { reward, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.train.dim()
    }

    /// Shows x ⊙ b to the expert under option o and scores the answer.
    pub fn query_instance(&self, x: &[f64], y: u8, action: &Action) -> Result<(DecisionOutput, f64), ExpertError> {
        let xm = action.mask.apply(x);
        let out = self.expert.decide(&xm, &action.mask, action.option)?;
        let r = compute_reward(&self.reward, y, action, &out);
        Ok((out, r))
    }

    /// Queries on training instance `i`.
    pub fn query(&self, i: usize, action: &Action) -> Result<Observation, ExpertError> {
        let (output, reward) = self.query_instance(self.train.features(i), self.train.label(i), action)?;
        Ok(Observation { instance_index: i, action: action.clone(), output, reward })
    }
}

/// Greedy-policy performance on a held-out set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_reward: f64,
    pub mean_nfeat: f64,
    pub option_freq: Vec<f64>,
    /// Fraction of evaluated actions that show each feature.
    pub feature_freq: Vec<f64>,
    /// Decision accuracy at threshold 0.5.
    pub accuracy: f64,
    pub failures: usize,
    /// Chosen action per test row; `None` where the expert query failed.
    pub choices: Vec<Option<Action>>,
}

/// Highest tolerated share of failed expert queries during evaluation.
pub const MAX_EVAL_FAILURE_RATE: f64 = 0.01;

fn instance_rng(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Acts greedily with `est` on every row of `test`, queries the expert once
/// per row and averages the true rewards.
pub fn evaluate_policy<E>(est: &E, env: &Environment, test: &Dataset, action_cap: usize, seed: u64) -> Result<Evaluation>
where
    E: RewardEstimator + Sync + ?Sized,
{
    let candidates = CandidateSource::new(test.dim(), env.n_options, action_cap);
    evaluate_with(env, test, |i, x| {
        let mut rng = instance_rng(seed, i);
        let cands = candidates.sample(&mut rng);
        let scores = est.estimate_many(x, &cands);
        let (best, _) = crate::domain::argmax(&scores).expect("candidate set is never empty");
        cands[best].clone()
    })
}

/// Evaluates an arbitrary per-row action rule.
pub fn evaluate_with<F>(env: &Environment, test: &Dataset, choose: F) -> Result<Evaluation>
where
    F: Fn(usize, &[f64]) -> Action + Sync,
{
    let n = test.len();
    let d = test.dim();
    if n == 0 {
        return Err(DissError::EmptyDataset);
    }
    let rows: Vec<(Action, std::result::Result<(DecisionOutput, f64), ExpertError>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = test.features(i);
            let action = choose(i, x);
            let out = env.query_instance(x, test.label(i), &action);
            (action, out)
        })
        .collect();

    let failures = rows.iter().filter(|r| r.1.is_err()).count();
    if failures as f64 > MAX_EVAL_FAILURE_RATE * n as f64 || failures == n {
        return Err(DissError::EvaluationInvalid { failed: failures, total: n });
    }
    let ok = (n - failures) as f64;
    let (mut reward, mut nfeat, mut correct) = (0.0, 0.0, 0.0);
    let mut option_freq = vec![0.0; env.n_options];
    let mut feature_freq = vec![0.0; d];
    let mut choices = Vec::with_capacity(n);
    for (i, (action, out)) in rows.into_iter().enumerate() {
        match out {
            Ok((o, r)) => {
                reward += r;
                nfeat += action.mask.count() as f64;
                option_freq[action.option] += 1.0;
                for j in action.mask.selected() {
                    feature_freq[j] += 1.0;
                }
                if u8::from(o.prob_positive >= 0.5) == test.label(i) {
                    correct += 1.0;
                }
                choices.push(Some(action));
            }
            Err(_) => choices.push(None),
        }
    }
    option_freq.iter_mut().chain(feature_freq.iter_mut()).for_each(|v| *v /= ok);
    Ok(Evaluation {
        mean_reward: reward / ok,
        mean_nfeat: nfeat / ok,
        option_freq,
        feature_freq,
        accuracy: correct / ok,
        failures,
        choices,
    })
}

/// Share of evaluated actions that show feature `j`.
pub fn poison_avoidance_metric(eval: &Evaluation, j: usize) -> f64 {
    eval.feature_freq[j]
}

/// Share of buffered queries that showed feature `j`.
pub fn buffer_feature_frequency(buffer: &ReplayBuffer, j: usize) -> f64 {
    let n = buffer.len().max(1) as f64;
    buffer.observations().iter().filter(|o| o.action.mask.get(j)).count() as f64 / n
}

/// Named strategy presets: an acquisition rule plus the estimator used to
/// steer it and to act at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mimic,
    MimicCmts,
    Fcmts,
    Fts,
    Random,
    ModisteKnn,
    ModisteUknn,
}

impl Method {
    pub const ALL: [Method; 7] =
        [Method::Mimic, Method::MimicCmts, Method::Fcmts, Method::Fts, Method::Random, Method::ModisteKnn, Method::ModisteUknn];

    pub fn key(self) -> &'static str {
        match self {
            Method::Mimic => "mimic",
            Method::MimicCmts => "mimic_cmts",
            Method::Fcmts => "fcmts",
            Method::Fts => "fts",
            Method::Random => "random",
            Method::ModisteKnn => "modiste_knn",
            Method::ModisteUknn => "modiste_uknn",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Mimic => "Mimic",
            Method::MimicCmts => "Mimic-CMTS",
            Method::Fcmts => "FCMTS",
            Method::Fts => "FTS",
            Method::Random => "Random",
            Method::ModisteKnn => "Modiste-KNN",
            Method::ModisteUknn => "Modiste-UKNN",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        let s = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL.into_iter().find(|m| m.key() == s)
    }

    pub fn strategy(self) -> Strategy {
        match self {
            Method::Mimic | Method::Fts => Strategy::FtsTs,
            Method::MimicCmts | Method::Fcmts => Strategy::FtsCmts,
            Method::Random => Strategy::Random,
            Method::ModisteKnn => Strategy::ModisteKnn,
            Method::ModisteUknn => Strategy::ModisteUknn,
        }
    }

    pub fn estimator(self) -> EstimatorKind {
        match self {
            Method::Mimic | Method::MimicCmts => EstimatorKind::Mimic,
            _ => EstimatorKind::Plain,
        }
    }

    /// Base config with this method's strategy and estimator filled in.
    pub fn configure(self, base: &AcquisitionConfig) -> AcquisitionConfig {
        AcquisitionConfig { strategy: self.strategy(), estimator: self.estimator(), ..base.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub queries: usize,
    pub mean_reward: f64,
    pub mean_nfeat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub strategy: String,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub method: Method,
    pub seed: u64,
    pub buffer: ReplayBuffer,
    pub curve: LearningCurve,
    /// Evaluation at the last checkpoint.
    pub final_eval: Evaluation,
}

/// Evaluates the greedy policy learned from the first `prefix` observations.
pub fn evaluate_prefix(
    method: Method,
    cfg: &AcquisitionConfig,
    env: &Environment,
    factory: Option<&EstimatorFactory>,
    observations: &[Observation],
    seed: u64,
) -> Result<Evaluation> {
    match method.strategy() {
        Strategy::ModisteKnn | Strategy::ModisteUknn => {
            let variant = if method.strategy() == Strategy::ModisteKnn { ModisteVariant::Knn } else { ModisteVariant::Uknn };
            let policy = ModistePolicy::new(variant, cfg.modiste, env.n_options, &env.train, observations);
            evaluate_policy(&policy, env, &env.test, cfg.action_cap, seed)
        }
        _ => {
            let factory = factory.expect("estimator factory for model-based methods");
            let est = factory.fit(observations, env, seed)?;
            evaluate_policy(&est.view(Head::Mean), env, &env.test, cfg.action_cap, seed)
        }
    }
}

/// One seed: acquisition, then a held-out evaluation at every checkpoint.
pub fn run_seed(env: &Environment, base: &AcquisitionConfig, method: Method, seed: u64) -> Result<SeedRun> {
    let cfg = method.configure(base);
    let run = run_acquisition(&cfg, env, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xE7A1);
    let factory = match method.strategy() {
        Strategy::ModisteKnn | Strategy::ModisteUknn => None,
        _ => Some(EstimatorFactory::new(method.estimator(), cfg.ensemble, env, rng.random())?),
    };
    let mut points = Vec::with_capacity(run.checkpoints.len());
    let mut last = None;
    for &t in &run.checkpoints {
        let prefix = &run.buffer.observations()[..t.min(run.buffer.len())];
        let eval = evaluate_prefix(method, &cfg, env, factory.as_ref(), prefix, rng.random())?;
        points.push(CurvePoint { queries: t, mean_reward: eval.mean_reward, mean_nfeat: eval.mean_nfeat });
        last = Some(eval);
    }
    Ok(SeedRun {
        method,
        seed,
        buffer: run.buffer,
        curve: LearningCurve { strategy: method.label().to_owned(), seed, points },
        final_eval: last.expect("at least one checkpoint"),
    })
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub runs: Vec<SeedRun>,
    pub failed: Vec<(u64, DissError)>,
}

impl ExperimentOutcome {
    pub fn curves(&self) -> Vec<LearningCurve> {
        self.runs.iter().map(|r| r.curve.clone()).collect()
    }

    pub fn mean_final_reward(&self) -> f64 {
        self.runs.iter().map(|r| r.final_eval.mean_reward).sum::<f64>() / self.runs.len() as f64
    }

    pub fn mean_final_nfeat(&self) -> f64 {
        self.runs.iter().map(|r| r.final_eval.mean_nfeat).sum::<f64>() / self.runs.len() as f64
    }
}

/// Runs every seed (in parallel) and keeps the ones that complete.
pub fn run_experiment(env: &Environment, base: &AcquisitionConfig, method: Method, seeds: &[u64]) -> Result<ExperimentOutcome> {
    let results: Vec<(u64, Result<SeedRun>)> = seeds.par_iter().map(|&s| (s, run_seed(env, base, method, s))).collect();
    let mut runs = Vec::new();
    let mut failed = Vec::new();
    for (s, r) in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => failed.push((s, e)),
        }
    }
    if runs.is_empty() {
        return match failed.into_iter().next() {
            Some((_, e)) => Err(e),
            None => Err(DissError::NoCompletedSeeds),
        };
    }
    Ok(ExperimentOutcome { runs, failed })
}

/// Accuracy of masks whose bits are Bernoulli(p), options uniform.
pub fn random_mask_accuracy(env: &Environment, p: f64, seed: u64) -> Result<f64> {
    let p = p.clamp(0.0, 1.0);
    let eval = evaluate_with(env, &env.test, |i, x| {
        let mut rng = instance_rng(seed ^ 0x5EED, i);
        let bits: Vec<bool> = (0..x.len()).map(|_| rng.random_bool(p)).collect();
        Action::new(Mask::from_bools(&bits), rng.random_range(0..env.n_options))
    })?;
    Ok(eval.accuracy)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub mean_reward: f64,
    pub mean_nfeat: f64,
    pub policy_accuracy: f64,
    /// Accuracy of random masks with the policy's average cardinality.
    pub random_accuracy: f64,
}

/// Reruns `method` at each cardinality penalty λ.
pub fn interpretability_sweep(
    env: &Environment,
    lambdas: &[f64],
    base: &AcquisitionConfig,
    method: Method,
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0)) {
        return Err(DissError::config("sweep.lambdas", format!("λ must be non-negative, got {l}")));
    }
    let d = env.dim() as f64;
    lambdas
        .iter()
        .map(|&lambda| {
            let env_l = env.with_reward(RewardSpec::penalized(lambda).with_epsilon(env.reward.epsilon));
            let outcome = run_experiment(&env_l, base, method, seeds)?;
            let n = outcome.runs.len() as f64;
            let mut random_accuracy = 0.0;
            for r in &outcome.runs {
                random_accuracy += random_mask_accuracy(&env_l, r.final_eval.mean_nfeat / d, r.seed)?;
            }
            Ok(SweepRow {
                lambda,
                mean_reward: outcome.mean_final_reward(),
                mean_nfeat: outcome.mean_final_nfeat(),
                policy_accuracy: outcome.runs.iter().map(|r| r.final_eval.accuracy).sum::<f64>() / n,
                random_accuracy: random_accuracy / n,
            })
        })
        .collect()
}

/// Random (test row, action) pairs for probing a mimic model off-policy.
pub fn held_out_pairs(env: &Environment, count: usize, seed: u64) -> Vec<(usize, Action)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = env.dim();
    (0..count)
        .map(|_| {
            let i = rng.random_range(0..env.test.len());
            (i, Action::new(Mask::random(d, &mut rng), rng.random_range(0..env.n_options)))
        })
        .collect()
}

/// Mean |M̂(x ⊙ b, o) − η| over test pairs, with η from the real expert.
pub fn mimic_error(est: &MimicEstimator, env: &Environment, pairs: &[(usize, Action)]) -> Result<f64> {
    let errs: Vec<std::result::Result<f64, ExpertError>> = pairs
        .par_iter()
        .map(|(i, a)| {
            let x = env.test.features(*i);
            let eta = env.expert.decide(&a.mask.apply(x), &a.mask, a.option)?.prob_positive;
            Ok((est.mimic_prob(x, a, Head::Mean) - eta).abs())
        })
        .collect();
    let mut total = 0.0;
    for e in errs {
        total += e?;
    }
    Ok(total / pairs.len().max(1) as f64)
}

/// Share of evaluated rows whose chosen option equals the pool expert
/// responsible for the row's cluster.
pub fn routing_accuracy(env: &Environment, eval: &Evaluation) -> Option<f64> {
    let clustering = env.routing.as_ref()?;
    let (mut hit, mut total) = (0usize, 0usize);
    for (i, choice) in eval.choices.iter().enumerate() {
        if let Some(a) = choice {
            total += 1;
            if clustering.nearest(env.test.features(i)) == a.option {
                hit += 1;
            }
        }
    }
    Some(hit as f64 / total.max(1) as f64)
}
