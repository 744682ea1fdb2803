use serde::{Deserialize, Serialize};

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Mean target of the `k` smallest-distance entries, ties broken by position.
/// Returns the mean and the number of entries used, or `None` when empty.
pub fn k_nearest_mean(entries: &mut [(f64, f64)], k: usize) -> Option<(f64, usize)> {
    if entries.is_empty() || k == 0 {
        return None;
    }
    let used = k.min(entries.len());
    // stable sort keeps insertion order among equal distances
    entries.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mean = entries[..used].iter().map(|e| e.1).sum::<f64>() / used as f64;
    Some((mean, used))
}

/// Mean target of the k nearest training points (Euclidean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnRegressor {
    pub k: usize,
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl KnnRegressor {
    pub fn new(k: usize, points: Vec<Vec<f64>>, targets: Vec<f64>) -> Self {
        assert_eq!(points.len(), targets.len());
        KnnRegressor { k: k.max(1), points, targets }
    }

    pub fn predict(&self, query: &[f64]) -> Option<f64> {
        self.predict_with(query, euclidean)
    }

    pub fn predict_with(&self, query: &[f64], metric: impl Fn(&[f64], &[f64]) -> f64) -> Option<f64> {
        let mut entries: Vec<(f64, f64)> =
            self.points.iter().zip(&self.targets).map(|(p, &t)| (metric(query, p), t)).collect();
        k_nearest_mean(&mut entries, self.k).map(|(m, _)| m)
    }
}
