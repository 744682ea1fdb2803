//! Budgeted acquisition of decision-maker observations.

pub mod buffer;
pub mod fts;
pub mod modiste;

use std::borrow::Cow;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{action_space_size, enumerate_or_sample_actions, Action, Mask, Observation};
use crate::error::{DissError, ExpertError, Result};
use crate::estimators::ensemble::EnsembleEstimator;
use crate::estimators::{EnsembleConfig, LabelModel, MimicEstimator, PlainEstimator};
use crate::runner::Environment;

pub use buffer::{BufferRecord, ReplayBuffer, StrategyMeta};
pub use fts::{fts_step, select_fts, FtsMode, Selection};
pub use modiste::{
    action_vector, modiste_acquire_step, modiste_knn_estimate, modiste_uknn_estimate, uknn_distance, ModisteConfig,
    ModistePolicy, ModisteVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    FtsTs,
    FtsCmts,
    Random,
    ModisteKnn,
    ModisteUknn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Plain,
    Mimic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub budget: usize,
    pub warmup: usize,
    pub ensemble: EnsembleConfig,
    pub batch_size: usize,
    pub refit_interval: usize,
    pub action_cap: usize,
    pub checkpoint_every: usize,
    pub strategy: Strategy,
    pub estimator: EstimatorKind,
    pub modiste: ModisteConfig,
    pub max_consecutive_failures: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            budget: 8000,
            warmup: 500,
            ensemble: EnsembleConfig::default(),
            batch_size: 32,
            refit_interval: 25,
            action_cap: 5000,
            checkpoint_every: 250,
            strategy: Strategy::FtsTs,
            estimator: EstimatorKind::Mimic,
            modiste: ModisteConfig::default(),
            max_consecutive_failures: 20,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("acquisition.warmup", self.warmup),
            ("acquisition.batch_size", self.batch_size),
            ("acquisition.refit_interval", self.refit_interval),
            ("acquisition.action_cap", self.action_cap),
            ("acquisition.checkpoint_every", self.checkpoint_every),
            ("acquisition.ensemble_size", self.ensemble.size),
            ("acquisition.max_consecutive_failures", self.max_consecutive_failures),
            ("acquisition.modiste.k", self.modiste.k),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(DissError::config(field, "must be at least 1"));
            }
        }
        if self.warmup > self.budget {
            return Err(DissError::config("acquisition.warmup", format!("warmup {} exceeds budget {}", self.warmup, self.budget)));
        }
        if self.modiste.nu < 0.0 || self.modiste.bonus < 0.0 {
            return Err(DissError::config("acquisition.modiste", "nu and bonus must be non-negative"));
        }
        let b = &self.ensemble.boost;
        if b.n_trees == 0 || b.max_depth == 0 || !(b.learning_rate > 0.0) || b.min_leaf == 0 {
            return Err(DissError::config("acquisition.boost", "n_trees, max_depth, min_leaf and learning_rate must be positive"));
        }
        Ok(())
    }

    /// Buffer lengths at which the learned policy is evaluated: warmup end,
    /// every multiple of `checkpoint_every` in between, and the budget.
    pub fn checkpoints(&self) -> Vec<usize> {
        let mut out = vec![self.warmup];
        let step = self.checkpoint_every.max(1);
        let mut t = (self.warmup / step + 1) * step;
        while t < self.budget {
            out.push(t);
            t += step;
        }
        if self.budget > self.warmup {
            out.push(self.budget);
        }
        out
    }
}

/// Per-instance candidate actions: the full action space when it fits under
/// the cap (shared by every instance), otherwise a fresh sample each time.
#[derive(Debug, Clone)]
pub struct CandidateSource {
    d: usize,
    n_options: usize,
    cap: usize,
    full: Option<Arc<Vec<Action>>>,
}

impl CandidateSource {
    pub fn new(d: usize, n_options: usize, cap: usize) -> Self {
        let fits = action_space_size(d, n_options).is_some_and(|s| s <= cap as u64);
        let full = fits.then(|| {
            let mut unused = ChaCha8Rng::seed_from_u64(0);
            Arc::new(enumerate_or_sample_actions(d, n_options, cap, &mut unused))
        });
        CandidateSource { d, n_options, cap, full }
    }

    pub fn is_exhaustive(&self) -> bool {
        self.full.is_some()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Cow<'_, [Action]> {
        match &self.full {
            Some(all) => Cow::Borrowed(all.as_slice()),
            None => Cow::Owned(enumerate_or_sample_actions(self.d, self.n_options, self.cap, rng)),
        }
    }
}

pub fn random_action<R: Rng + ?Sized>(d: usize, n_options: usize, rng: &mut R) -> Action {
    let mask = Mask::random(d, rng);
    Action::new(mask, rng.random_range(0..n_options))
}

/// A fitted reward model used to steer acquisition or to act greedily.
#[derive(Debug, Clone)]
pub enum FittedEstimator {
    Plain(PlainEstimator),
    Mimic(MimicEstimator),
}

impl EnsembleEstimator for FittedEstimator {
    fn ensemble_size(&self) -> usize {
        match self {
            FittedEstimator::Plain(e) => e.ensemble_size(),
            FittedEstimator::Mimic(e) => e.ensemble_size(),
        }
    }

    fn score(&self, x: &[f64], actions: &[Action], head: crate::estimators::Head) -> Vec<f64> {
        match self {
            FittedEstimator::Plain(e) => e.score(x, actions, head),
            FittedEstimator::Mimic(e) => e.score(x, actions, head),
        }
    }

    fn score_pair(&self, x: &[f64], actions: &[Action], member: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            FittedEstimator::Plain(e) => e.score_pair(x, actions, member),
            FittedEstimator::Mimic(e) => e.score_pair(x, actions, member),
        }
    }
}

/// Fits either estimator kind on a buffer prefix. The label model is fitted
/// once per run and shared.
pub struct EstimatorFactory {
    pub kind: EstimatorKind,
    pub ensemble: EnsembleConfig,
    label_model: Option<Arc<LabelModel>>,
}

impl EstimatorFactory {
    pub fn new(kind: EstimatorKind, ensemble: EnsembleConfig, env: &Environment, seed: u64) -> Result<Self> {
        let label_model = match kind {
            EstimatorKind::Mimic => Some(Arc::new(LabelModel::fit(&env.train, &ensemble, env.reward.epsilon, seed)?)),
            EstimatorKind::Plain => None,
        };
        Ok(EstimatorFactory { kind, ensemble, label_model })
    }

    pub fn label_model(&self) -> Option<&Arc<LabelModel>> {
        self.label_model.as_ref()
    }

    pub fn fit(&self, observations: &[Observation], env: &Environment, seed: u64) -> Result<FittedEstimator> {
        Ok(match &self.label_model {
            Some(label) => FittedEstimator::Mimic(MimicEstimator::fit(
                label.clone(),
                observations,
                &env.train,
                env.n_options,
                &self.ensemble,
                env.reward,
                seed,
            )?),
            None => FittedEstimator::Plain(PlainEstimator::fit(
                observations,
                &env.train,
                crate::estimators::InputEncoder::raw(env.train.dim(), env.n_options),
                &self.ensemble,
                seed,
            )?),
        })
    }
}

/// Consecutive-failure bookkeeping shared by warmup and strategy steps.
struct FailureGuard {
    consecutive: usize,
    limit: usize,
}

impl FailureGuard {
    fn record(&mut self, buffer: &mut ReplayBuffer, err: ExpertError) -> Result<()> {
        buffer.log_failure(err.to_string());
        self.consecutive += 1;
        if self.consecutive >= self.limit {
            return Err(DissError::TooManyFailures(self.consecutive));
        }
        Ok(())
    }
}

fn random_query<R: Rng + ?Sized>(env: &Environment, rng: &mut R) -> (usize, Action) {
    let i = rng.random_range(0..env.train.len());
    (i, random_action(env.train.dim(), env.n_options, rng))
}

/// `t_init` uniformly random queries: instance uniform, mask bits fair
/// coins, option uniform.
pub fn run_warmup<R: Rng + ?Sized>(env: &Environment, t_init: usize, rng: &mut R) -> Result<ReplayBuffer> {
    let mut buffer = ReplayBuffer::new();
    let mut guard = FailureGuard { consecutive: 0, limit: usize::MAX };
    fill_random(env, &mut buffer, t_init, StrategyMeta::Warmup, &mut guard, rng)?;
    Ok(buffer)
}

fn fill_random<R: Rng + ?Sized>(
    env: &Environment,
    buffer: &mut ReplayBuffer,
    target: usize,
    meta: StrategyMeta,
    guard: &mut FailureGuard,
    rng: &mut R,
) -> Result<()> {
    while buffer.len() < target {
        let (i, action) = random_query(env, rng);
        match env.query(i, &action) {
            Ok(obs) => {
                guard.consecutive = 0;
                buffer.push(obs, meta.clone());
            }
            Err(e) => guard.record(buffer, e)?,
        }
    }
    Ok(())
}

/// Outcome of one seeded acquisition run.
#[derive(Debug, Clone)]
pub struct AcquisitionRun {
    pub buffer: ReplayBuffer,
    pub checkpoints: Vec<usize>,
}

/// Warmup followed by the configured strategy until the buffer holds
/// `budget` observations. Failed expert queries are logged and retried with
/// a fresh selection; they do not consume budget.
pub fn run_acquisition(cfg: &AcquisitionConfig, env: &Environment, seed: u64) -> Result<AcquisitionRun> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut guard = FailureGuard { consecutive: 0, limit: cfg.max_consecutive_failures };
    let mut buffer = ReplayBuffer::new();
    fill_random(env, &mut buffer, cfg.warmup, StrategyMeta::Warmup, &mut guard, &mut rng)?;

    let candidates = CandidateSource::new(env.train.dim(), env.n_options, cfg.action_cap);
    match cfg.strategy {
        Strategy::Random => fill_random(env, &mut buffer, cfg.budget, StrategyMeta::Random, &mut guard, &mut rng)?,
        Strategy::FtsTs | Strategy::FtsCmts => {
            let mode = if cfg.strategy == Strategy::FtsTs { FtsMode::Ts } else { FtsMode::Cmts };
            let factory = EstimatorFactory::new(cfg.estimator, cfg.ensemble, env, rng.next_u64())?;
            let mut fitted: Option<(usize, FittedEstimator)> = None;
            while buffer.len() < cfg.budget {
                let stale = fitted.as_ref().is_none_or(|(at, _)| buffer.len() - at >= cfg.refit_interval);
                if stale {
                    let est = factory.fit(buffer.observations(), env, rng.next_u64())?;
                    fitted = Some((buffer.len(), est));
                }
                let est = &fitted.as_ref().expect("estimator fitted above").1;
                match fts_step(&mut buffer, est, mode, env, cfg.batch_size, &candidates, &mut rng) {
                    Ok(()) => guard.consecutive = 0,
                    Err(e) => guard.record(&mut buffer, e)?,
                }
            }
        }
        Strategy::ModisteKnn | Strategy::ModisteUknn => {
            let variant = if cfg.strategy == Strategy::ModisteKnn { ModisteVariant::Knn } else { ModisteVariant::Uknn };
            while buffer.len() < cfg.budget {
                match modiste_acquire_step(&mut buffer, variant, env, &cfg.modiste, &candidates, &mut rng) {
                    Ok(()) => guard.consecutive = 0,
                    Err(e) => guard.record(&mut buffer, e)?,
                }
            }
        }
    }
    Ok(AcquisitionRun { buffer, checkpoints: cfg.checkpoints() })
}
