use super::{check_option, DecisionMaker};
use crate::data::Dataset;
use crate::domain::{DecisionOutput, Mask, DEFAULT_EPSILON};
use crate::error::{DissError, ExpertError, Result};
use crate::estimators::logistic::{LogisticConfig, LogisticModel};

/// Per-query logistic regression fitted on the k nearest support rows,
/// using only the features the mask exposes.
#[derive(Debug, Clone)]
pub struct LocalLinearExpert {
    support: Vec<Vec<f64>>,
    labels: Vec<u8>,
    k_neighbors: usize,
    fit: LogisticConfig,
    epsilon: f64,
}

impl LocalLinearExpert {
    pub fn new(support: &Dataset, k_neighbors: usize, ridge: f64) -> Result<Self> {
        if k_neighbors < 2 || k_neighbors > support.len() {
            return Err(DissError::config(
                "k_neighbors",
                format!("need 2 <= k <= {} (support size), got {k_neighbors}", support.len()),
            ));
        }
        if ridge < 0.0 {
            return Err(DissError::config("ridge", "must be non-negative"));
        }
        Ok(LocalLinearExpert {
            support: support.instances.iter().map(|i| i.features.clone()).collect(),
            labels: support.labels(),
            k_neighbors,
            fit: LogisticConfig { ridge, ..Default::default() },
            epsilon: DEFAULT_EPSILON,
        })
    }

    fn clamp(&self, p: f64) -> f64 {
        p.clamp(self.epsilon, 1.0 - self.epsilon)
    }

    /// Indices of the k nearest support rows under the masked Euclidean
    /// distance; ties keep support order.
    pub fn neighbors(&self, x_masked: &[f64], mask: &Mask) -> Vec<usize> {
        let selected: Vec<usize> = mask.selected().collect();
        if selected.is_empty() {
            return (0..self.k_neighbors).collect();
        }
        let mut dist: Vec<(f64, usize)> = self
            .support
            .iter()
            .enumerate()
            .map(|(i, s)| (selected.iter().map(|&j| (x_masked[j] - s[j]).powi(2)).sum::<f64>(), i))
            .collect();
        dist.select_nth_unstable_by(self.k_neighbors - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut nn: Vec<(f64, usize)> = dist[..self.k_neighbors].to_vec();
        nn.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        nn.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict(&self, x_masked: &[f64], mask: &Mask) -> f64 {
        let nn = self.neighbors(x_masked, mask);
        let positives = nn.iter().filter(|&&i| self.labels[i] == 1).count();
        let selected: Vec<usize> = mask.selected().collect();
        if selected.is_empty() {
            return self.clamp(positives as f64 / nn.len() as f64);
        }
        if positives == 0 || positives == nn.len() {
            return self.clamp(if positives == 0 { 0.0 } else { 1.0 });
        }
        let rows: Vec<Vec<f64>> = nn.iter().map(|&i| selected.iter().map(|&j| self.support[i][j]).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let y: Vec<f64> = nn.iter().map(|&i| f64::from(self.labels[i])).collect();
        let model = LogisticModel::fit(&refs, &y, &self.fit);
        let q: Vec<f64> = selected.iter().map(|&j| x_masked[j]).collect();
        self.clamp(model.predict(&q))
    }
}

impl DecisionMaker for LocalLinearExpert {
    fn dim(&self) -> usize {
        self.support[0].len()
    }

    fn decide(&self, x_masked: &[f64], mask: &Mask, option: usize) -> Result<DecisionOutput, ExpertError> {
        check_option(option, 1)?;
        Ok(DecisionOutput::new(self.predict(x_masked, mask)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Instance;

    fn support(rows: Vec<(Vec<f64>, u8)>) -> Dataset {
        let d = rows[0].0.len();
        let inst = rows.into_iter().map(|(x, y)| Instance::new(x, Some(y))).collect();
        Dataset::new("s", Dataset::default_names(d), inst).unwrap()
    }

    #[test]
    fn single_class_neighborhood() {
        let ds = support((0..10).map(|i| (vec![i as f64], 1)).collect());
        let e = LocalLinearExpert::new(&ds, 4, 1e-2).unwrap();
        assert_eq!(e.predict(&[3.0], &Mask::ones(1)), 1.0 - 1e-6);
    }

    #[test]
    fn separable_neighborhood_far_positive() {
        let ds = support((0..20).map(|i| (vec![i as f64 / 4.0 - 2.5, 0.0], u8::from(i >= 10))).collect());
        let e = LocalLinearExpert::new(&ds, 20, 1e-2).unwrap();
        let m = Mask::parse_bitstring("10").unwrap();
        assert!(e.predict(&[3.0, 0.0], &m) > 0.9);
        assert!(e.predict(&[-3.0, 0.0], &m) < 0.1);
    }

    #[test]
    fn empty_mask_uses_first_rows() {
        let labels = [1, 0, 1, 1, 0, 0, 0, 0];
        let ds = support(labels.iter().enumerate().map(|(i, &y)| (vec![i as f64], y)).collect());
        let e = LocalLinearExpert::new(&ds, 4, 1e-2).unwrap();
        assert_eq!(e.predict(&[0.0], &Mask::zeros(1)), 0.75);
        assert!(LocalLinearExpert::new(&ds, 9, 1e-2).is_err());
        assert!(LocalLinearExpert::new(&ds, 1, 1e-2).is_err());
    }

    #[test]
    fn neighbors_ignore_hidden_features() {
        let ds = support(vec![(vec![0.0, 100.0], 0), (vec![1.0, 0.0], 1), (vec![5.0, 0.0], 1)]);
        let e = LocalLinearExpert::new(&ds, 2, 0.0).unwrap();
        assert_eq!(e.neighbors(&[0.0, 0.0], &Mask::parse_bitstring("10").unwrap()), vec![0, 1]);
    }
}
