use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::learners::{check_training_data, require_both_classes, Classifier, Scaler};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// RBF width; `None` means 1 / width.
    pub gamma: Option<f64>,
    pub lambda: f64,
    pub epochs: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            gamma: None,
            lambda: 1e-3,
            epochs: 200,
            seed: 42,
            standardize: true,
        }
    }
}

/// Kernel expansion `f(x) = Σ coef_j · K(sv_j, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub scaler: Scaler,
}

/// `exp(−gamma·‖a − b‖²)`
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    (-gamma * d2).exp()
}

/// Kernelized Pegasos: `epochs × n` stochastic sub-gradient steps on the
/// hinge loss, visiting rows in a seeded shuffled order each epoch.
pub fn fit_svm_rbf(x: &[Vec<f64>], y: &[u8], params: &SvmParams) -> Result<SvmModel> {
    let width = check_training_data(x, y)?;
    require_both_classes(y)?;
    let gamma = params.gamma.unwrap_or(1.0 / width.max(1) as f64);
    if gamma.is_nan()
        || gamma <= 0.0
        || params.lambda.is_nan()
        || params.lambda <= 0.0
        || params.epochs == 0
    {
        return Err(Error::InvalidConfig(
            "svm needs gamma > 0, lambda > 0, epochs ≥ 1".into(),
        ));
    }
    let scaler = if params.standardize {
        Scaler::fit(x)
    } else {
        Scaler::identity(width)
    };
    let xs: Vec<Vec<f64>> = x.iter().map(|r| scaler.transform(r)).collect();
    let n = xs.len();
    let signs: Vec<f64> = y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();

    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = rbf_kernel(&xs[i], &xs[j], gamma);
            gram[i * n + j] = k;
            gram[j * n + i] = k;
        }
    }

    let mut alpha = vec![0u64; n];
    let mut order: Vec<usize> = (0..n).collect();
    let mut r = rng::seeded(params.seed);
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut r);
        for &i in &order {
            t += 1;
            let row = &gram[i * n..(i + 1) * n];
            let s: f64 = (0..n)
                .filter(|&j| alpha[j] > 0)
                .map(|j| alpha[j] as f64 * signs[j] * row[j])
                .sum();
            if signs[i] * s / (params.lambda * t as f64) < 1.0 {
                alpha[i] += 1;
            }
        }
    }

    let scale = params.lambda * t as f64;
    let (support_vectors, coefficients) = (0..n)
        .filter(|&j| alpha[j] > 0)
        .map(|j| (xs[j].clone(), alpha[j] as f64 * signs[j] / scale))
        .unzip();
    Ok(SvmModel {
        gamma,
        support_vectors,
        coefficients,
        scaler,
    })
}

impl Classifier for SvmModel {
    fn n_features(&self) -> usize {
        self.scaler.means.len()
    }

    /// Raw decision value, uncalibrated.
    fn score(&self, x: &[f64]) -> f64 {
        let xs = self.scaler.transform(x);
        self.support_vectors
            .iter()
            .zip(&self.coefficients)
            .map(|(sv, c)| c * rbf_kernel(sv, &xs, self.gamma))
            .sum()
    }

    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.0)
    }
}
