//! Gradient-boosted regression trees with exact greedy, level-wise splits.

use serde::{Deserialize, Serialize};

use super::logistic::{logit, sigmoid};
use super::Matrix;
use crate::domain::DEFAULT_EPSILON;
use crate::error::{DissError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Squared,
    /// Cross-entropy on (possibly soft) targets in [0, 1].
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_leaf: usize,
    /// L2 term added to the hessian sum of logistic leaves.
    pub hessian_reg: f64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig { n_trees: 64, max_depth: 4, learning_rate: 0.3, min_leaf: 2, hessian_reg: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

/// Axis-aligned regression tree; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub loss: Loss,
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl BoostedTrees {
    /// base_score + learning_rate · Σ tree outputs.
    pub fn predict_raw(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    /// Regression value, or P(y = 1) for the logistic loss.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let raw = self.predict_raw(row);
        match self.loss {
            Loss::Squared => raw,
            Loss::Logistic => sigmoid(raw),
        }
    }

    /// Mean training loss (squared error or cross-entropy) over a sample set.
    pub fn loss_on(&self, x: &Matrix, y: &[f64]) -> f64 {
        let n = x.rows().max(1) as f64;
        (0..x.rows())
            .map(|i| {
                let f = self.predict_raw(x.row(i));
                match self.loss {
                    Loss::Squared => (y[i] - f).powi(2),
                    Loss::Logistic => {
                        let p = sigmoid(f).clamp(1e-15, 1.0 - 1e-15);
                        -(y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln())
                    }
                }
            })
            .sum::<f64>()
            / n
    }
}

struct NodeStats {
    sum: f64,
    count: usize,
    tree_index: usize,
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Fits a boosted ensemble. Each tree fits the negative gradient of the loss
/// by squared-error splits; logistic leaves take a Newton step.
pub fn fit_boosted_trees(x: &Matrix, y: &[f64], loss: Loss, cfg: &BoostConfig) -> Result<BoostedTrees> {
    let n = x.rows();
    if n == 0 {
        return Err(DissError::EmptySamples);
    }
    assert_eq!(y.len(), n, "target length must match row count");
    let p = x.cols();

    let mean = y.iter().sum::<f64>() / n as f64;
    let base_score = match loss {
        Loss::Squared => mean,
        Loss::Logistic => logit(mean.clamp(DEFAULT_EPSILON, 1.0 - DEFAULT_EPSILON)),
    };

    let presorted: Vec<Vec<u32>> = (0..p)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| x.get(a as usize, f).total_cmp(&x.get(b as usize, f)).then(a.cmp(&b)));
            idx
        })
        .collect();

    let mut raw = vec![base_score; n];
    let mut resid = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(cfg.n_trees);
    for _ in 0..cfg.n_trees {
        for i in 0..n {
            match loss {
                Loss::Squared => {
                    resid[i] = y[i] - raw[i];
                    hess[i] = 1.0;
                }
                Loss::Logistic => {
                    let q = sigmoid(raw[i]);
                    resid[i] = y[i] - q;
                    hess[i] = q * (1.0 - q);
                }
            }
        }
        let tree = grow_tree(x, &presorted, &resid, &hess, loss, cfg);
        for (i, r) in raw.iter_mut().enumerate() {
            *r += cfg.learning_rate * tree.predict(x.row(i));
        }
        trees.push(tree);
    }
    Ok(BoostedTrees { loss, base_score, learning_rate: cfg.learning_rate, n_features: p, trees })
}

fn grow_tree(
    x: &Matrix,
    presorted: &[Vec<u32>],
    resid: &[f64],
    hess: &[f64],
    loss: Loss,
    cfg: &BoostConfig,
) -> Tree {
    const INACTIVE: u32 = u32::MAX;
    let n = x.rows();
    let min_leaf = cfg.min_leaf.max(1);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut node_of = vec![0u32; n];
    let mut level = vec![NodeStats { sum: resid.iter().sum(), count: n, tree_index: 0 }];
    let mut hess_sum = vec![hess.iter().sum::<f64>()];

    let leaf_value = |sum: f64, h: f64, count: usize| match loss {
        Loss::Squared => sum / count as f64,
        Loss::Logistic => sum / (h + cfg.hessian_reg),
    };

    for depth in 0..=cfg.max_depth {
        let k = level.len();
        let mut best: Vec<Option<Candidate>> = vec![None; k];
        if depth < cfg.max_depth {
            let mut left_sum = vec![0.0; k];
            let mut left_cnt = vec![0usize; k];
            let mut last = vec![f64::NAN; k];
            for (f, order) in presorted.iter().enumerate() {
                left_sum.iter_mut().for_each(|v| *v = 0.0);
                left_cnt.iter_mut().for_each(|v| *v = 0);
                for &i in order {
                    let i = i as usize;
                    let node = node_of[i];
                    if node == INACTIVE {
                        continue;
                    }
                    let node = node as usize;
                    let v = x.get(i, f);
                    let stats = &level[node];
                    let lc = left_cnt[node];
                    if lc >= min_leaf && stats.count - lc >= min_leaf && v > last[node] {
                        let ls = left_sum[node];
                        let rs = stats.sum - ls;
                        let rc = stats.count - lc;
                        let gain = ls * ls / lc as f64 + rs * rs / rc as f64 - stats.sum * stats.sum / stats.count as f64;
                        if gain > 1e-12 && best[node].is_none_or(|b| gain > b.gain) {
                            let a = last[node];
                            let mut threshold = a + (v - a) / 2.0;
                            if threshold >= v {
                                threshold = a;
                            }
                            best[node] = Some(Candidate { gain, feature: f, threshold });
                        }
                    }
                    left_sum[node] += resid[i];
                    left_cnt[node] += 1;
                    last[node] = v;
                }
            }
        }

        let mut next_level = Vec::new();
        let mut next_hess = Vec::new();
        let mut remap = vec![INACTIVE; k * 2];
        for (node, stats) in level.iter().enumerate() {
            match best[node] {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes.push(Node::Leaf { value: 0.0 });
                    nodes[stats.tree_index] =
                        Node::Split { feature: c.feature, threshold: c.threshold, left, right: left + 1 };
                    remap[2 * node] = next_level.len() as u32;
                    next_level.push(NodeStats { sum: 0.0, count: 0, tree_index: left });
                    next_hess.push(0.0);
                    remap[2 * node + 1] = next_level.len() as u32;
                    next_level.push(NodeStats { sum: 0.0, count: 0, tree_index: left + 1 });
                    next_hess.push(0.0);
                }
                None => {
                    nodes[stats.tree_index] = Node::Leaf { value: leaf_value(stats.sum, hess_sum[node], stats.count) };
                }
            }
        }
        if next_level.is_empty() {
            break;
        }
        for i in 0..n {
            let node = node_of[i];
            if node == INACTIVE {
                continue;
            }
            let node = node as usize;
            node_of[i] = match best[node] {
                Some(c) => {
                    let side = usize::from(x.get(i, c.feature) > c.threshold);
                    let child = remap[2 * node + side];
                    let s = &mut next_level[child as usize];
                    s.sum += resid[i];
                    s.count += 1;
                    next_hess[child as usize] += hess[i];
                    child
                }
                None => INACTIVE,
            };
        }
        level = next_level;
        hess_sum = next_hess;
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> (Matrix, Vec<f64>) {
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        (Matrix::from_rows(xs.iter().map(|&v| vec![v]).collect()), xs)
    }

    #[test]
    fn empty_samples_rejected() {
        let x = Matrix::new(0, 2, vec![]);
        assert!(matches!(fit_boosted_trees(&x, &[], Loss::Squared, &BoostConfig::default()), Err(DissError::EmptySamples)));
    }

    #[test]
    fn constant_target_is_constant() {
        let x = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, -1.0], vec![0.5, 0.5]]);
        let m = fit_boosted_trees(&x, &[2.5; 3], Loss::Squared, &BoostConfig::default()).unwrap();
        for q in [[0.0, 0.0], [10.0, -10.0], [1.0, 2.0]] {
            assert!((m.predict(&q) - 2.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_trees_is_base_score() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let cfg = BoostConfig { n_trees: 0, ..Default::default() };
        let m = fit_boosted_trees(&x, &[1.0, 2.0, 3.0, 6.0], Loss::Squared, &cfg).unwrap();
        assert_eq!(m.predict(&[9.0]), 3.0);
        let m = fit_boosted_trees(&x, &[1.0, 0.0, 0.0, 0.0], Loss::Logistic, &cfg).unwrap();
        assert!((m.predict_raw(&[0.0]) - (0.25f64 / 0.75).ln()).abs() < 1e-12);
    }

    #[test]
    fn identity_grid_fits_well() {
        let (x, y) = grid(100);
        let cfg = BoostConfig { n_trees: 64, max_depth: 3, ..Default::default() };
        let m = fit_boosted_trees(&x, &y, Loss::Squared, &cfg).unwrap();
        let rmse = (m.loss_on(&x, &y)).sqrt();
        assert!(rmse < 0.05, "rmse {rmse}");
        assert!(m.trees.iter().all(|t| t.depth() <= 3));
    }

    #[test]
    fn min_leaf_is_respected() {
        let x = Matrix::from_rows(vec![vec![0.0], vec![1.0], vec![2.0]]);
        let m = fit_boosted_trees(&x, &[0.0, 0.0, 9.0], Loss::Squared, &BoostConfig::default()).unwrap();
        // any split would leave a single sample on one side
        assert!(m.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn loss_non_increasing_in_tree_count() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![(i % 7) as f64, (i % 5) as f64 * 0.3]).collect();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] * 0.7).sin() + r[1]).collect();
        let x = Matrix::from_rows(rows);
        let mut prev = f64::INFINITY;
        for t in [0, 1, 2, 4, 8, 16, 32, 64] {
            let cfg = BoostConfig { n_trees: t, ..Default::default() };
            let l = fit_boosted_trees(&x, &y, Loss::Squared, &cfg).unwrap().loss_on(&x, &y);
            assert!(l <= prev + 1e-12);
            prev = l;
        }
    }

    #[test]
    fn threshold_between_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let x = Matrix::from_rows(vec![vec![a], vec![a], vec![b], vec![b]]);
        let m = fit_boosted_trees(&x, &[0.0, 0.0, 1.0, 1.0], Loss::Squared, &BoostConfig { learning_rate: 1.0, ..Default::default() }).unwrap();
        assert!(m.predict(&[a]).abs() < 1e-9);
        assert!((m.predict(&[b]) - 1.0).abs() < 1e-9);
    }
}
