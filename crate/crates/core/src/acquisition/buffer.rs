use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{Action, DecisionOutput, Mask, Observation};
use crate::error::{DissError, Result};

/// How an observation's query was chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyMeta {
    Warmup,
    Random,
    Ts { member: usize },
    Cmts { member: usize, improvement: f64 },
    Modiste { score: f64, matches: usize },
}

/// One line of the NDJSON buffer file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferRecord {
    pub t: usize,
    pub i: usize,
    pub mask: Mask,
    pub option: usize,
    pub eta: f64,
    pub reward: f64,
    pub strategy_meta: StrategyMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    /// Buffer length when the failure happened.
    pub at: usize,
    pub message: String,
}

/// Append-only store of acquired observations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplayBuffer {
    observations: Vec<Observation>,
    meta: Vec<StrategyMeta>,
    failures: Vec<FailureRecord>,
}

impl ReplayBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn push(&mut self, obs: Observation, meta: StrategyMeta) {
        self.observations.push(obs);
        self.meta.push(meta);
    }

    pub fn log_failure(&mut self, message: String) {
        self.failures.push(FailureRecord { at: self.len(), message });
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn meta(&self) -> &[StrategyMeta] {
        &self.meta
    }

    pub fn failures(&self) -> &[FailureRecord] {
        &self.failures
    }

    pub fn min_reward(&self) -> Option<f64> {
        self.observations.iter().map(|o| o.reward).reduce(f64::min)
    }

    pub fn records(&self) -> impl Iterator<Item = BufferRecord> + '_ {
        self.observations.iter().zip(&self.meta).enumerate().map(|(t, (o, m))| BufferRecord {
            t,
            i: o.instance_index,
            mask: o.action.mask.clone(),
            option: o.action.option,
            eta: o.output.prob_positive,
            reward: o.reward,
            strategy_meta: m.clone(),
        })
    }

    pub fn write_ndjson<W: Write>(&self, out: W) -> Result<()> {
        let mut out = BufWriter::new(out);
        for r in self.records() {
            serde_json::to_writer(&mut out, &r)?;
            out.write_all(b"\n").map_err(|e| DissError::io("<buffer>", e))?;
        }
        out.flush().map_err(|e| DissError::io("<buffer>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| DissError::io(path, e))?;
        self.write_ndjson(f)
    }

    /// Rebuilds a buffer from NDJSON. Expert metadata beyond η is not stored.
    pub fn read_ndjson<R: std::io::Read>(input: R) -> Result<Self> {
        let mut buf = ReplayBuffer::new();
        for (n, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| DissError::io("<buffer>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: BufferRecord = serde_json::from_str(&line)
                .map_err(|e| DissError::MalformedRow { line: n as u64 + 1, message: e.to_string() })?;
            let obs = Observation {
                instance_index: r.i,
                action: Action::new(r.mask, r.option),
                output: DecisionOutput::new(r.eta),
                reward: r.reward,
            };
            buf.push(obs, r.strategy_meta);
        }
        Ok(buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| DissError::io(path, e))?;
        Self::read_ndjson(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_round_trip() {
        let mut b = ReplayBuffer::new();
        let obs = |i: usize, bits: &str, eta: f64, r: f64| Observation {
            instance_index: i,
            action: Action::new(Mask::parse_bitstring(bits).unwrap(), i % 2),
            output: DecisionOutput::new(eta),
            reward: r,
        };
        b.push(obs(3, "101", 0.25, -0.3), StrategyMeta::Warmup);
        b.push(obs(4, "011", 0.1 + 0.2, -1.0 / 3.0), StrategyMeta::Cmts { member: 1, improvement: 0.125 });
        let mut bytes = Vec::new();
        b.write_ndjson(&mut bytes).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().contains("\"mask\":\"101\""));
        let back = ReplayBuffer::read_ndjson(bytes.as_slice()).unwrap();
        assert_eq!(back, b);
        assert_eq!(b.min_reward(), Some(-1.0 / 3.0));
    }

    #[test]
    fn bad_line_reports_number() {
        let err = ReplayBuffer::read_ndjson("\n{oops}\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DissError::MalformedRow { line: 2, .. }));
    }
}
