//! Reward estimation: boosted trees, bootstrap ensembles, KNN regression and
//! the mimic-structured estimator.

pub mod boosting;
pub mod ensemble;
pub mod knn;
pub mod logistic;
pub mod mimic;
pub mod snapshot;

use serde::{Deserialize, Serialize};

pub use boosting::{fit_boosted_trees, BoostConfig, BoostedTrees, Loss};
pub use ensemble::{BootstrapEnsemble, EnsembleConfig, Head, PlainEstimator};
pub use knn::KnnRegressor;
pub use logistic::{LogisticConfig, LogisticModel};
pub use mimic::{expected_reward, LabelModel, MimicEstimator};

use crate::domain::Action;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix shape does not match data length");
        Matrix { rows, cols, data }
    }

    pub fn with_cols(cols: usize) -> Self {
        Matrix { rows: 0, cols, data: Vec::new() }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut m = Matrix::with_cols(cols);
        for r in rows {
            m.push_row(&r);
        }
        m
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row width mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

/// Encodes (x, b, o) as `[x ‖ b ‖ one-hot(o)]`; the one-hot block is omitted
/// when there is a single option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputEncoder {
    pub d: usize,
    pub n_options: usize,
    /// Zero out unselected feature values (x ⊙ b) instead of passing them raw.
    pub mask_values: bool,
}

impl InputEncoder {
    pub fn raw(d: usize, n_options: usize) -> Self {
        InputEncoder { d, n_options, mask_values: false }
    }

    pub fn masked(d: usize, n_options: usize) -> Self {
        InputEncoder { d, n_options, mask_values: true }
    }

    pub fn width(&self) -> usize {
        2 * self.d + if self.n_options > 1 { self.n_options } else { 0 }
    }

    pub fn encode_into(&self, x: &[f64], action: &Action, out: &mut Vec<f64>) {
        out.clear();
        for (j, &v) in x.iter().enumerate() {
            out.push(if self.mask_values && !action.mask.get(j) { 0.0 } else { v });
        }
        out.extend(action.mask.iter().map(|b| if b { 1.0 } else { 0.0 }));
        if self.n_options > 1 {
            out.extend((0..self.n_options).map(|o| if o == action.option { 1.0 } else { 0.0 }));
        }
    }

    pub fn encode(&self, x: &[f64], action: &Action) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        self.encode_into(x, action, &mut out);
        out
    }
}
