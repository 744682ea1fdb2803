use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub ridge: f64,
    pub max_iter: usize,
    /// Stop once the gradient's ∞-norm drops below this.
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        LogisticConfig { ridge: 1e-2, max_iter: 500, tol: 1e-6 }
    }
}

/// Ridge-regularized logistic regression (intercept unpenalized).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

impl LogisticModel {
    /// Full-batch gradient descent on mean log-loss + ridge/2·‖w‖². Targets
    /// may be soft labels in [0, 1].
    pub fn fit(rows: &[&[f64]], targets: &[f64], cfg: &LogisticConfig) -> Self {
        let n = rows.len();
        let p = rows.first().map_or(0, |r| r.len());
        let mut weights = vec![0.0; p];
        let mut bias = 0.0;
        if n == 0 {
            return LogisticModel { weights, bias, iterations: 0 };
        }
        let max_sq = rows.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
        let step = 1.0 / (0.25 * (max_sq + 1.0) + cfg.ridge);

        let mut grad_w = vec![0.0; p];
        let mut iterations = 0;
        for it in 0..cfg.max_iter {
            grad_w.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for (row, &t) in rows.iter().zip(targets) {
                let z = bias + row.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>();
                let r = sigmoid(z) - t;
                grad_b += r;
                for (g, v) in grad_w.iter_mut().zip(row.iter()) {
                    *g += r * v;
                }
            }
            let inv = 1.0 / n as f64;
            grad_b *= inv;
            let mut norm = grad_b.abs();
            for (g, w) in grad_w.iter_mut().zip(&weights) {
                *g = *g * inv + cfg.ridge * w;
                norm = norm.max(g.abs());
            }
            iterations = it;
            if norm < cfg.tol {
                break;
            }
            bias -= step * grad_b;
            for (w, g) in weights.iter_mut().zip(&grad_w) {
                *w -= step * g;
            }
            iterations = it + 1;
        }
        LogisticModel { weights, bias, iterations }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        sigmoid(self.bias + row.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
        assert!((logit(sigmoid(1.3)) - 1.3).abs() < 1e-12);
    }

    #[test]
    fn separable_fit_is_confident() {
        let xs: Vec<Vec<f64>> = (-5..=5).filter(|&i| i != 0).map(|i| vec![i as f64 * 0.3]).collect();
        let ys: Vec<f64> = xs.iter().map(|x| f64::from(u8::from(x[0] > 0.0))).collect();
        let rows: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let m = LogisticModel::fit(&rows, &ys, &LogisticConfig::default());
        assert!(m.predict(&[2.0]) > 0.9);
        assert!(m.predict(&[-2.0]) < 0.1);
    }

    #[test]
    fn constant_soft_target_recovers_intercept() {
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 - 10.0) / 10.0]).collect();
        let rows: Vec<&[f64]> = xs.iter().map(|r| r.as_slice()).collect();
        let ys = vec![0.25; 20];
        let cfg = LogisticConfig { max_iter: 5000, ..Default::default() };
        let m = LogisticModel::fit(&rows, &ys, &cfg);
        assert!((m.predict(&[0.0]) - 0.25).abs() < 1e-3);
    }
}
