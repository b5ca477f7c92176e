use serde::{Deserialize, Serialize};

/// Per-feature standardization. Constant features get std 1 so they map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let width = x.first().map_or(0, Vec::len);
        let mut means = vec![0.0; width];
        let mut stds = vec![0.0; width];
        for j in 0..width {
            let first = x[0][j];
            if x.iter().all(|r| r[j] == first) {
                means[j] = first;
                stds[j] = 1.0;
                continue;
            }
            let m = x.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = x.iter().map(|r| (r[j] - m) * (r[j] - m)).sum::<f64>() / n;
            means[j] = m;
            stds[j] = var.sqrt();
        }
        Self { means, stds }
    }

    pub fn identity(width: usize) -> Self {
        Self {
            means: vec![0.0; width],
            stds: vec![1.0; width],
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}
