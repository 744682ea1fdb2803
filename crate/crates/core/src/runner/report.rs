//! Curve tables: CSV in and out, and per-strategy mean ± sd aggregation.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LearningCurve;
use crate::error::{DissError, Result};

pub const CURVE_COLUMNS: [&str; 5] = ["strategy", "seed", "queries", "mean_reward", "mean_nfeat"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub strategy: String,
    pub seed: u64,
    pub queries: usize,
    pub mean_reward: f64,
    pub mean_nfeat: f64,
}

pub fn curve_rows(curves: &[LearningCurve]) -> Vec<CurveRow> {
    curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(|p| CurveRow {
                strategy: c.strategy.clone(),
                seed: c.seed,
                queries: p.queries,
                mean_reward: p.mean_reward,
                mean_nfeat: p.mean_nfeat,
            })
        })
        .collect()
}

pub fn write_curves_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| DissError::Schema(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| DissError::Schema(e.to_string()))?;
    }
    w.flush().map_err(|e| DissError::io(path, e))
}

pub fn read_curves_csv(path: &Path) -> Result<Vec<CurveRow>> {
    let file = std::fs::File::open(path).map_err(|e| DissError::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header: Vec<String> = r.headers().map_err(|e| DissError::Schema(e.to_string()))?.iter().map(str::to_owned).collect();
    if header != CURVE_COLUMNS {
        return Err(DissError::Schema(format!(
            "{}: expected columns {}, found {}",
            path.display(),
            CURVE_COLUMNS.join(","),
            header.join(",")
        )));
    }
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<CurveRow>, _>>()
        .map_err(|e| DissError::Schema(format!("{}: {e}", path.display())))?;
    if rows.is_empty() {
        return Err(DissError::Schema(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub strategy: String,
    pub queries: usize,
    pub mean_reward: f64,
    /// Sample standard deviation across seeds (0 for a single seed).
    pub sd_reward: f64,
    pub mean_nfeat: f64,
    pub seeds: usize,
}

/// Mean and sample sd across seeds at every (strategy, queries) point, in
/// first-seen strategy order.
pub fn aggregate(rows: &[CurveRow]) -> Result<Vec<AggregatePoint>> {
    if rows.is_empty() {
        return Err(DissError::NoCompletedSeeds);
    }
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<&CurveRow>> = BTreeMap::new();
    for r in rows {
        let s = match order.iter().position(|s| *s == r.strategy) {
            Some(s) => s,
            None => {
                order.push(r.strategy.clone());
                order.len() - 1
            }
        };
        groups.entry((s, r.queries)).or_default().push(r);
    }
    Ok(groups
        .into_iter()
        .map(|((s, queries), g)| {
            let n = g.len() as f64;
            let mean = g.iter().map(|r| r.mean_reward).sum::<f64>() / n;
            let var = if g.len() > 1 { g.iter().map(|r| (r.mean_reward - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            AggregatePoint {
                strategy: order[s].clone(),
                queries,
                mean_reward: mean,
                sd_reward: var.sqrt(),
                mean_nfeat: g.iter().map(|r| r.mean_nfeat).sum::<f64>() / n,
                seeds: g.len(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(s: &str, seed: u64, q: usize, r: f64) -> CurveRow {
        CurveRow { strategy: s.into(), seed, queries: q, mean_reward: r, mean_nfeat: 1.0 }
    }

    #[test]
    fn aggregate_mean_and_sd() {
        let rows = vec![row("B", 0, 10, -1.0), row("B", 1, 10, -3.0), row("A", 0, 10, -0.5)];
        let agg = aggregate(&rows).unwrap();
        assert_eq!(agg[0].strategy, "B");
        assert_eq!(agg[0].mean_reward, -2.0);
        assert!((agg[0].sd_reward - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(agg[1].sd_reward, 0.0);
    }

    #[test]
    fn csv_round_trip_and_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let rows = vec![row("Mimic", 3, 500, -0.1234567890123), row("Mimic", 3, 750, -0.1)];
        write_curves_csv(&p, &rows).unwrap();
        assert_eq!(read_curves_csv(&p).unwrap(), rows);
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_curves_csv(&bad), Err(DissError::Schema(_))));
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "strategy,seed,queries,mean_reward,mean_nfeat\n").unwrap();
        assert!(read_curves_csv(&empty).is_err());
    }
}
