//! Shared domain types: instances, feature masks, actions, decision outputs,
//! observations, the log-likelihood reward and the greedy policy.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Default probability clamp used by rewards and classifier outputs.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// A feature vector with an optional binary ground-truth label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<f64>,
    pub label: Option<u8>,
}

impl Instance {
    pub fn new(features: Vec<f64>, label: Option<u8>) -> Self {
        Instance { features, label }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn is_finite(&self) -> bool {
        self.features.iter().all(|v| v.is_finite())
    }
}

/// Feature subset indicator stored as a packed bitset. Bit `j` selects feature `j`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mask {
    len: usize,
    words: Vec<u64>,
}

impl Mask {
    pub fn zeros(len: usize) -> Self {
        Mask { len, words: vec![0; len.div_ceil(64).max(1)] }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = Mask::zeros(len);
        for j in 0..len {
            m.set(j, true);
        }
        m
    }

    /// Bit `j` of `counter` becomes feature `j`. Only the low `len` bits are used.
    pub fn from_counter(len: usize, counter: u64) -> Self {
        let mut m = Mask::zeros(len);
        for j in 0..len.min(64) {
            if (counter >> j) & 1 == 1 {
                m.set(j, true);
            }
        }
        m
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut m = Mask::zeros(bits.len());
        for (j, &b) in bits.iter().enumerate() {
            m.set(j, b);
        }
        m
    }

    /// Parses a string of `0`/`1` characters, feature 0 first.
    pub fn parse_bitstring(s: &str) -> Option<Self> {
        let mut m = Mask::zeros(s.len());
        for (j, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => m.set(j, true),
                _ => return None,
            }
        }
        Some(m)
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut m = Mask::zeros(len);
        for j in 0..len {
            if rng.random_bool(0.5) {
                m.set(j, true);
            }
        }
        m
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, j: usize) -> bool {
        debug_assert!(j < self.len);
        (self.words[j / 64] >> (j % 64)) & 1 == 1
    }

    pub fn set(&mut self, j: usize, on: bool) {
        assert!(j < self.len, "mask index {j} out of range for length {}", self.len);
        let bit = 1u64 << (j % 64);
        if on {
            self.words[j / 64] |= bit;
        } else {
            self.words[j / 64] &= !bit;
        }
    }

    /// Number of selected features, ‖b‖₁.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Euclidean norm ‖b‖₂ of the 0/1 vector.
    pub fn l2_norm(&self) -> f64 {
        (self.count() as f64).sqrt()
    }

    pub fn hamming(&self, other: &Mask) -> usize {
        self.words.iter().zip(&other.words).map(|(a, b)| (a ^ b).count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.get(j))
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&j| self.get(j))
    }

    /// Hadamard product x ⊙ b.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(j, &v)| if self.get(j) { v } else { 0.0 }).collect()
    }

    pub fn to_bitstring(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mask({})", self.to_bitstring())
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl Serialize for Mask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_bitstring())
    }
}

impl<'de> Deserialize<'de> for Mask {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Mask::parse_bitstring(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid mask bitstring {s:?}")))
    }
}

/// A feature mask paired with a discrete option (expert index, prompt style, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub mask: Mask,
    pub option: usize,
}

impl Action {
    pub fn new(mask: Mask, option: usize) -> Self {
        Action { mask, option }
    }
}

/// Scalar metadata attached to a decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Number(f64),
    Text(String),
}

/// Probability the decision-maker assigns to ŷ = 1, plus optional metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutput {
    pub prob_positive: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, MetaValue>,
}

impl DecisionOutput {
    /// Builds an output, clipping the probability into [0, 1].
    pub fn new(prob_positive: f64) -> Self {
        DecisionOutput { prob_positive: prob_positive.clamp(0.0, 1.0), metadata: BTreeMap::new() }
    }

    pub fn with_meta(mut self, key: &str, value: MetaValue) -> Self {
        self.metadata.insert(key.to_owned(), value);
        self
    }
}

/// One acquired decision-making observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub instance_index: usize,
    pub action: Action,
    pub output: DecisionOutput,
    pub reward: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    LogLikelihood,
    LogLikelihoodWithCardinalityPenalty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub kind: RewardKind,
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for RewardSpec {
    fn default() -> Self {
        RewardSpec::plain()
    }
}

impl RewardSpec {
    pub fn plain() -> Self {
        RewardSpec { kind: RewardKind::LogLikelihood, lambda: 0.0, epsilon: DEFAULT_EPSILON }
    }

    pub fn penalized(lambda: f64) -> Self {
        RewardSpec {
            kind: RewardKind::LogLikelihoodWithCardinalityPenalty,
            lambda,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.epsilon, 1.0 - self.epsilon)
    }

    /// The cardinality penalty λ‖b‖₁ (zero for the plain log-likelihood kind).
    pub fn penalty(&self, mask: &Mask) -> f64 {
        match self.kind {
            RewardKind::LogLikelihood => 0.0,
            RewardKind::LogLikelihoodWithCardinalityPenalty => self.lambda * mask.count() as f64,
        }
    }

    /// Log-likelihood of label `y` under probability `eta`, clamped to [ε, 1−ε].
    pub fn log_likelihood(&self, y: u8, eta: f64) -> f64 {
        let p = self.clamp(eta);
        if y == 1 {
            p.ln()
        } else {
            (1.0 - p).ln()
        }
    }
}

/// y·log η̃ + (1−y)·log(1−η̃) − λ‖b‖₁ with η̃ = clamp(η, ε, 1−ε).
pub fn compute_reward(spec: &RewardSpec, y: u8, action: &Action, output: &DecisionOutput) -> f64 {
    spec.log_likelihood(y, output.prob_positive) - spec.penalty(&action.mask)
}

/// Size of the action space `2^d · n_options`, or `None` on overflow.
pub fn action_space_size(d: usize, n_options: usize) -> Option<u64> {
    if d >= 64 {
        return None;
    }
    (1u64 << d).checked_mul(n_options as u64)
}

/// The full action space when it has at most `cap` elements (option-major,
/// masks as a binary counter), otherwise `cap` distinct uniformly drawn actions.
pub fn enumerate_or_sample_actions<R: Rng + ?Sized>(
    d: usize,
    n_options: usize,
    cap: usize,
    rng: &mut R,
) -> Vec<Action> {
    assert!(cap >= 1 && n_options >= 1, "cap and n_options must be positive");
    match action_space_size(d, n_options) {
        Some(size) if size <= cap as u64 => {
            let mut out = Vec::with_capacity(size as usize);
            for option in 0..n_options {
                for counter in 0..(1u64 << d) {
                    out.push(Action::new(Mask::from_counter(d, counter), option));
                }
            }
            out
        }
        _ => {
            let mut seen = HashSet::with_capacity(cap);
            let mut out = Vec::with_capacity(cap);
            while out.len() < cap {
                let mask = Mask::random(d, rng);
                let option = rng.random_range(0..n_options);
                let action = Action::new(mask, option);
                if seen.insert(action.clone()) {
                    out.push(action);
                }
            }
            out
        }
    }
}

/// Anything mapping (x, b, o) to an estimated expected reward.
pub trait RewardEstimator {
    fn estimate(&self, x: &[f64], action: &Action) -> f64;

    /// Scores every candidate for one instance. Implementations may share
    /// per-instance work across candidates.
    fn estimate_many(&self, x: &[f64], actions: &[Action]) -> Vec<f64> {
        actions.iter().map(|a| self.estimate(x, a)).collect()
    }
}

impl<F> RewardEstimator for F
where
    F: Fn(&[f64], &Action) -> f64,
{
    fn estimate(&self, x: &[f64], action: &Action) -> f64 {
        self(x, action)
    }
}

/// Index and value of the first maximum; NaN entries never win.
pub fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

/// Outcome of a greedy choice over a candidate list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Choice {
    pub index: usize,
    pub value: f64,
}

/// argmax over `candidates` of the estimator at `x`; ties go to the lowest index.
/// Returns `None` for an empty candidate list.
pub fn greedy_policy<E: RewardEstimator + ?Sized>(
    estimator: &E,
    x: &[f64],
    candidates: &[Action],
) -> Option<Choice> {
    let scores = estimator.estimate_many(x, candidates);
    argmax(&scores).map(|(index, value)| Choice { index, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn act(bits: &str) -> Action {
        Action::new(Mask::parse_bitstring(bits).unwrap(), 0)
    }

    #[test]
    fn reward_examples() {
        let spec = RewardSpec::plain();
        let r = compute_reward(&spec, 1, &act("00"), &DecisionOutput::new(0.5));
        assert!((r - (-0.693147)).abs() < 1e-6);

        let r = compute_reward(&spec, 1, &act("00"), &DecisionOutput::new(1.0));
        assert!((r - (1.0 - 1e-6f64).ln()).abs() < 1e-15);
        assert!((r + 1.0e-6).abs() < 1e-9);

        let spec = RewardSpec::penalized(0.5);
        let r = compute_reward(&spec, 0, &act("1101"), &DecisionOutput::new(0.2));
        assert!((r - (-1.723144)).abs() < 1e-6);
    }

    #[test]
    fn zero_lambda_kinds_coincide() {
        let a = RewardSpec::plain();
        let b = RewardSpec::penalized(0.0);
        for eta in [0.0, 0.1, 0.5, 0.99, 1.0] {
            for y in [0, 1] {
                let o = DecisionOutput::new(eta);
                assert_eq!(compute_reward(&a, y, &act("111"), &o), compute_reward(&b, y, &act("111"), &o));
            }
        }
    }

    #[test]
    fn enumeration_small_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let acts = enumerate_or_sample_actions(2, 1, 5000, &mut rng);
        let strs: Vec<String> = acts.iter().map(|a| a.mask.to_bitstring()).collect();
        assert_eq!(strs, vec!["00", "10", "01", "11"]);
        assert_eq!(enumerate_or_sample_actions(3, 2, 5000, &mut rng).len(), 16);
        let acts = enumerate_or_sample_actions(3, 2, 5000, &mut rng);
        assert!(acts[..8].iter().all(|a| a.option == 0));
        assert!(acts[8..].iter().all(|a| a.option == 1));
    }

    #[test]
    fn sampling_caps_large_spaces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let acts = enumerate_or_sample_actions(18, 1, 5000, &mut rng);
        assert_eq!(acts.len(), 5000);
        let distinct: HashSet<_> = acts.iter().collect();
        assert_eq!(distinct.len(), 5000);
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(acts, enumerate_or_sample_actions(18, 1, 5000, &mut rng2));
    }

    #[test]
    fn sampling_with_cap_equal_to_space_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let acts = enumerate_or_sample_actions(3, 1, 7, &mut rng);
        assert_eq!(acts.iter().collect::<HashSet<_>>().len(), 7);
    }

    #[test]
    fn greedy_examples() {
        let cands = vec![act("00"), act("10"), act("11")];
        let constant = |_: &[f64], _: &Action| 1.0;
        assert_eq!(greedy_policy(&constant, &[0.0, 0.0], &cands).unwrap().index, 0);

        let neg_card = |_: &[f64], a: &Action| -(a.mask.count() as f64);
        let cands2 = vec![act("11"), act("10"), act("00")];
        assert_eq!(greedy_policy(&neg_card, &[0.0, 0.0], &cands2).unwrap().index, 2);

        let table = [-0.5, -0.1, -0.9];
        let by_index = |_: &[f64], a: &Action| table[a.mask.to_bitstring().chars().filter(|&c| c == '1').count()];
        assert_eq!(greedy_policy(&by_index, &[0.0, 0.0], &cands).unwrap().index, 1);

        assert!(greedy_policy(&constant, &[0.0], &[]).is_none());
    }

    #[test]
    fn mask_basics() {
        let m = Mask::parse_bitstring("1011").unwrap();
        assert_eq!(m.count(), 3);
        assert_eq!(m.apply(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 0.0, 3.0, 4.0]);
        assert_eq!(m.selected().collect::<Vec<_>>(), vec![0, 2, 3]);
        assert_eq!(m.hamming(&Mask::zeros(4)), 3);
        let big = Mask::ones(130);
        assert_eq!(big.count(), 130);
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "\"1011\"");
        assert_eq!(serde_json::from_str::<Mask>(&json).unwrap(), m);
    }
}
