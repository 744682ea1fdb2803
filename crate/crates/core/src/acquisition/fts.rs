//! Frequentist Thompson sampling: ensemble members stand in for posterior
//! draws, the member average for the posterior mean.

use rand::Rng;
use rayon::prelude::*;

use super::{CandidateSource, ReplayBuffer, StrategyMeta};
use crate::domain::{argmax, Action};
use crate::error::ExpertError;
use crate::estimators::ensemble::{EnsembleEstimator, Head};
use crate::runner::Environment;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtsMode {
    /// Instance uniform at random.
    Ts,
    /// Instance with the largest improvement of the draw over the
    /// mean-optimal action, among a batch of uniform candidates.
    Cmts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub instance: usize,
    pub action: Action,
    pub meta: StrategyMeta,
}

/// Chooses the next query without touching the expert.
pub fn select_fts<E, R>(
    est: &E,
    mode: FtsMode,
    env: &Environment,
    batch_size: usize,
    candidates: &CandidateSource,
    rng: &mut R,
) -> Selection
where
    E: EnsembleEstimator + ?Sized,
    R: Rng + ?Sized,
{
    let n = env.train.len();
    let member = rng.random_range(0..est.ensemble_size().max(1));
    let draw = Head::Member(member);
    match mode {
        FtsMode::Ts => {
            let i = rng.random_range(0..n);
            let cands = candidates.sample(rng);
            let scores = est.score(env.train.features(i), &cands, draw);
            let (best, _) = argmax(&scores).expect("candidate set is never empty");
            Selection { instance: i, action: cands[best].clone(), meta: StrategyMeta::Ts { member } }
        }
        FtsMode::Cmts => {
            let batch: Vec<(usize, Vec<Action>)> = (0..batch_size.max(1))
                .map(|_| {
                    let i = rng.random_range(0..n);
                    (i, candidates.sample(rng).into_owned())
                })
                .collect();
            let scored: Vec<(f64, usize)> = batch
                .par_iter()
                .map(|(i, cands)| {
                    let x = env.train.features(*i);
                    let (mean, drawn) = est.score_pair(x, cands, member);
                    let (bar, _) = argmax(&mean).expect("candidate set is never empty");
                    let (best, top) = argmax(&drawn).expect("candidate set is never empty");
                    (top - drawn[bar], best)
                })
                .collect();
            let gains: Vec<f64> = scored.iter().map(|s| s.0).collect();
            let (pick, improvement) = argmax(&gains).expect("batch is never empty");
            let (i, cands) = &batch[pick];
            Selection {
                instance: *i,
                action: cands[scored[pick].1].clone(),
                meta: StrategyMeta::Cmts { member, improvement },
            }
        }
    }
}

/// Selects, queries the expert, and appends the observation.
pub fn fts_step<E, R>(
    buffer: &mut ReplayBuffer,
    est: &E,
    mode: FtsMode,
    env: &Environment,
    batch_size: usize,
    candidates: &CandidateSource,
    rng: &mut R,
) -> Result<(), ExpertError>
where
    E: EnsembleEstimator + ?Sized,
    R: Rng + ?Sized,
{
    let sel = select_fts(est, mode, env, batch_size, candidates, rng);
    let obs = env.query(sel.instance, &sel.action)?;
    buffer.push(obs, sel.meta);
    Ok(())
}
