use std::sync::Arc;

use super::{check_option, DecisionMaker, NwExpert};
use crate::data::{Clustering, Dataset};
use crate::domain::{DecisionOutput, Mask};
use crate::error::{DissError, ExpertError, Result};

/// Several experts behind one option index: option j routes to expert j.
#[derive(Clone)]
pub struct ExpertPool {
    experts: Vec<Arc<dyn DecisionMaker>>,
}

impl ExpertPool {
    pub fn new(experts: Vec<Arc<dyn DecisionMaker>>) -> Result<Self> {
        let Some(first) = experts.first() else {
            return Err(DissError::config("experts", "pool needs at least one expert"));
        };
        let d = first.dim();
        if experts.iter().any(|e| e.dim() != d) {
            return Err(DissError::config("experts", "pool experts disagree on dimensionality"));
        }
        Ok(ExpertPool { experts })
    }

    /// One Nadaraya–Watson expert per cluster, each knowing only its cluster.
    pub fn from_clustering(train: &Dataset, clustering: &Clustering, bandwidth: f64) -> Result<Self> {
        let experts = (0..clustering.k)
            .map(|c| {
                let support = train.select(&clustering.members(c));
                NwExpert::new(&support, bandwidth).map(|e| Arc::new(e) as Arc<dyn DecisionMaker>)
            })
            .collect::<Result<Vec<_>>>()?;
        ExpertPool::new(experts)
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn expert(&self, j: usize) -> Option<&Arc<dyn DecisionMaker>> {
        self.experts.get(j)
    }
}

impl DecisionMaker for ExpertPool {
    fn dim(&self) -> usize {
        self.experts[0].dim()
    }

    fn n_options(&self) -> usize {
        self.experts.len()
    }

    fn decide(&self, x_masked: &[f64], mask: &Mask, option: usize) -> Result<DecisionOutput, ExpertError> {
        check_option(option, self.experts.len())?;
        self.experts[option].decide(x_masked, mask, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Instance;

    fn constant_support(label: u8, offset: f64) -> Dataset {
        let inst = (0..4).map(|i| Instance::new(vec![offset + i as f64, 0.0], Some(label))).collect();
        Dataset::new("c", Dataset::default_names(2), inst).unwrap()
    }

    #[test]
    fn degenerate_pool_matches_expert() {
        let nw = NwExpert::new(&constant_support(1, 0.0), 1.0).unwrap();
        let pool = ExpertPool::new(vec![Arc::new(nw.clone())]).unwrap();
        let m = Mask::ones(2);
        assert_eq!(pool.decide(&[0.5, 0.0], &m, 0).unwrap(), nw.decide(&[0.5, 0.0], &m, 0).unwrap());
        assert!(matches!(pool.decide(&[0.5, 0.0], &m, 1), Err(ExpertError::OptionOutOfRange { .. })));
    }

    #[test]
    fn constant_label_supports_route() {
        let e0 = NwExpert::new(&constant_support(0, 0.0), 1.0).unwrap();
        let e1 = NwExpert::new(&constant_support(1, 10.0), 1.0).unwrap();
        let pool = ExpertPool::new(vec![Arc::new(e0), Arc::new(e1)]).unwrap();
        let z = Mask::zeros(2);
        assert_eq!(pool.decide(&[0.0, 0.0], &z, 0).unwrap().prob_positive, 0.0);
        assert_eq!(pool.decide(&[0.0, 0.0], &z, 1).unwrap().prob_positive, 1.0);
    }

    #[test]
    fn expert_depends_only_on_own_support() {
        let e0 = NwExpert::new(&constant_support(0, 0.0), 1.0).unwrap();
        let a = ExpertPool::new(vec![Arc::new(e0.clone()), Arc::new(NwExpert::new(&constant_support(1, 5.0), 1.0).unwrap())]).unwrap();
        let b = ExpertPool::new(vec![Arc::new(e0), Arc::new(NwExpert::new(&constant_support(0, -3.0), 2.0).unwrap())]).unwrap();
        let m = Mask::ones(2);
        assert_eq!(a.decide(&[1.0, 0.0], &m, 0).unwrap(), b.decide(&[1.0, 0.0], &m, 0).unwrap());
    }
}
