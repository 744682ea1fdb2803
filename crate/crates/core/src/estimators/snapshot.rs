//! Versioned JSON model snapshots.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{DissError, Result};

pub const MODEL_MAGIC: &str = "DISS-MODEL-1";

#[derive(Debug, Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    kind: String,
    model: T,
}

pub fn to_json<T: Serialize>(kind: &str, model: &T) -> Result<String> {
    Ok(serde_json::to_string(&Envelope { format: MODEL_MAGIC.to_owned(), kind: kind.to_owned(), model })?)
}

/// Parses a snapshot, checking the format string and the model kind.
pub fn from_json<T: DeserializeOwned>(kind: &str, text: &str) -> Result<T> {
    let env: Envelope<serde_json::Value> = serde_json::from_str(text)?;
    if env.format != MODEL_MAGIC {
        return Err(DissError::Snapshot(format!("unknown format {:?}", env.format)));
    }
    if env.kind != kind {
        return Err(DissError::Snapshot(format!("expected kind {kind:?}, found {:?}", env.kind)));
    }
    Ok(serde_json::from_value(env.model)?)
}

pub fn save<T: Serialize>(path: &Path, kind: &str, model: &T) -> Result<()> {
    std::fs::write(path, to_json(kind, model)?).map_err(|e| DissError::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| DissError::io(path, e))?;
    from_json(kind, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_boosted_trees, BoostConfig, BoostedTrees, Loss, Matrix};

    #[test]
    fn boosted_trees_survive_snapshot() {
        let x = Matrix::from_rows((0..20).map(|i| vec![i as f64, (i * i) as f64]).collect());
        let y: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let m = fit_boosted_trees(&x, &y, Loss::Squared, &BoostConfig::default()).unwrap();
        let text = to_json("boosted_trees", &m).unwrap();
        assert!(text.contains(MODEL_MAGIC));
        let back: BoostedTrees = from_json("boosted_trees", &text).unwrap();
        for i in 0..20 {
            assert_eq!(back.predict(x.row(i)), m.predict(x.row(i)));
        }
        assert!(from_json::<BoostedTrees>("label_model", &text).is_err());
        let bad = text.replace(MODEL_MAGIC, "OTHER-1");
        assert!(from_json::<BoostedTrees>("boosted_trees", &bad).is_err());
    }
}
