use serde::{Deserialize, Serialize};

use crate::learners::{check_training_data, require_both_classes, Classifier, Scaler};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub max_iters: usize,
    pub l2: f64,
    /// Stop once the gradient's max-norm falls below this.
    pub tolerance: f64,
    pub standardize: bool,
}

impl Default for LogRegParams {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_iters: 5000,
            l2: 0.0,
            tolerance: 1e-8,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub scaler: Scaler,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Mean negative log-likelihood plus `l2·‖w‖²/2`, with its gradient
/// `(∂/∂w, ∂/∂b)`. Rows are expected already standardized.
pub fn loss_and_gradient(
    x: &[Vec<f64>],
    y: &[u8],
    weights: &[f64],
    bias: f64,
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (row, &label) in x.iter().zip(y) {
        let z = bias + row.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
        // −[y log σ(z) + (1−y) log(1−σ(z))] = softplus(z) − y·z
        loss += softplus(z) - f64::from(label) * z;
        let r = sigmoid(z) - f64::from(label);
        for (g, a) in gw.iter_mut().zip(row) {
            *g += r * a;
        }
        gb += r;
    }
    loss /= n;
    gb /= n;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + l2 * w;
    }
    loss += 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, gw, gb)
}

pub fn fit_logistic_regression(
    x: &[Vec<f64>],
    y: &[u8],
    params: &LogRegParams,
) -> Result<LogisticModel> {
    fit_logistic_regression_traced(x, y, params).map(|(m, _)| m)
}

/// Full-batch gradient descent from zero. Also returns the loss at every
/// visited iterate (the first entry is the loss at zero weights).
pub fn fit_logistic_regression_traced(
    x: &[Vec<f64>],
    y: &[u8],
    params: &LogRegParams,
) -> Result<(LogisticModel, Vec<f64>)> {
    let width = check_training_data(x, y)?;
    if x.len() < 2 {
        return Err(Error::TooFewSamples(
            "logistic regression needs ≥ 2 rows".into(),
        ));
    }
    require_both_classes(y)?;
    if params.learning_rate.is_nan() || params.learning_rate <= 0.0 || params.l2 < 0.0 {
        return Err(Error::InvalidConfig(
            "learning_rate must be > 0 and l2 ≥ 0".into(),
        ));
    }
    let scaler = if params.standardize {
        Scaler::fit(x)
    } else {
        Scaler::identity(width)
    };
    let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();

    let mut w = vec![0.0; width];
    let mut b = 0.0;
    let mut history = Vec::new();
    for _ in 0..params.max_iters {
        let (loss, gw, gb) = loss_and_gradient(&xs, y, &w, b, params.l2);
        history.push(loss);
        let max_norm = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if max_norm < params.tolerance {
            break;
        }
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi -= params.learning_rate * gi;
        }
        b -= params.learning_rate * gb;
    }
    Ok((
        LogisticModel {
            weights: w,
            bias: b,
            scaler,
        },
        history,
    ))
}

impl Classifier for LogisticModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &[f64]) -> f64 {
        let xs = self.scaler.transform(x);
        sigmoid(
            self.bias
                + xs.iter()
                    .zip(&self.weights)
                    .map(|(a, w)| a * w)
                    .sum::<f64>(),
        )
    }

    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.5)
    }
}
