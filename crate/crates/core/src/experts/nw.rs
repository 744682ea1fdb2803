use super::{check_option, DecisionMaker};
use crate::data::Dataset;
use crate::domain::{DecisionOutput, Mask};
use crate::error::{DissError, ExpertError, Result};

/// Nadaraya–Watson label smoother with a Gaussian kernel over the selected
/// features. Squared distances are divided by max(‖b‖₁, 1) so the kernel
/// width does not shrink as more features are shown.
#[derive(Debug, Clone)]
pub struct NwExpert {
    support: Vec<Vec<f64>>,
    labels: Vec<f64>,
    bandwidth: f64,
}

impl NwExpert {
    pub fn new(support: &Dataset, bandwidth: f64) -> Result<Self> {
        if support.is_empty() {
            return Err(DissError::EmptyDataset);
        }
        if !(bandwidth > 0.0) {
            return Err(DissError::config("bandwidth", "must be positive"));
        }
        Ok(NwExpert {
            support: support.instances.iter().map(|i| i.features.clone()).collect(),
            labels: support.labels().into_iter().map(f64::from).collect(),
            bandwidth,
        })
    }

    pub fn support_len(&self) -> usize {
        self.support.len()
    }

    pub fn predict(&self, x_masked: &[f64], mask: &Mask) -> f64 {
        let selected: Vec<usize> = mask.selected().collect();
        if selected.is_empty() {
            return self.labels.iter().sum::<f64>() / self.labels.len() as f64;
        }
        let scale = 2.0 * self.bandwidth * self.bandwidth * selected.len() as f64;
        let d2: Vec<f64> = self
            .support
            .iter()
            .map(|s| selected.iter().map(|&j| (x_masked[j] - s[j]).powi(2)).sum::<f64>())
            .collect();
        // shift by the smallest distance so at least one weight is exactly 1
        let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut num, mut den) = (0.0, 0.0);
        for (dist, y) in d2.iter().zip(&self.labels) {
            let w = (-(dist - min) / scale).exp();
            num += w * y;
            den += w;
        }
        num / den
    }
}

impl DecisionMaker for NwExpert {
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

    fn support(rows: &[(f64, u8)]) -> Dataset {
        let inst = rows.iter().map(|&(x, y)| Instance::new(vec![x], Some(y))).collect();
        Dataset::new("s", vec!["x0".into()], inst).unwrap()
    }

    #[test]
    fn empty_mask_is_label_mean() {
        let e = NwExpert::new(&support(&[(0.0, 0), (1.0, 1), (2.0, 1), (3.0, 1)]), 1.0).unwrap();
        assert_eq!(e.predict(&[0.0], &Mask::zeros(1)), 0.75);
    }

    #[test]
    fn two_point_hand_value() {
        let e = NwExpert::new(&support(&[(0.0, 0), (2.0, 1)]), 1.0).unwrap();
        // weight on the y=1 point at distance 1.5
        let expected = (-1.125f64).exp() / ((-0.125f64).exp() + (-1.125f64).exp());
        let got = e.predict(&[0.5], &Mask::ones(1));
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - 0.269).abs() < 1e-3);
    }

    #[test]
    fn tiny_bandwidth_picks_coincident_point() {
        let e = NwExpert::new(&support(&[(0.0, 0), (1.0, 1), (3.0, 0)]), 1e-6).unwrap();
        assert_eq!(e.predict(&[1.0], &Mask::ones(1)), 1.0);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(NwExpert::new(&support(&[(0.0, 1)]), 0.0).is_err());
        let e = NwExpert::new(&support(&[(0.0, 1)]), 1.0).unwrap();
        assert!(e.decide(&[0.0], &Mask::ones(1), 1).is_err());
    }
}
