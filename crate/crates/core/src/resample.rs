//! SMOTE oversampling of the minority class.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::learners::Scaler;
use crate::model::LabeledDataset;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteParams {
    pub k_neighbors: usize,
    pub seed: u64,
    /// Desired minority/majority ratio after resampling, in (0, 1].
    pub target_ratio: f64,
    /// Search neighbours in standardized space. Synthetic rows are always
    /// interpolated in the original units.
    pub standardize: bool,
}

impl Default for SmoteParams {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            seed: 42,
            target_ratio: 1.0,
            standardize: false,
        }
    }
}

impl SmoteParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors < 1 {
            return Err(Error::InvalidConfig("k_neighbors must be ≥ 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target_ratio {} outside (0, 1]",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

/// Parents of one synthetic row: `row = base + u·(neighbor − base)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub u: f64,
}

pub fn smote(ds: &LabeledDataset, params: &SmoteParams) -> Result<LabeledDataset> {
    smote_traced(ds, params).map(|(d, _)| d)
}

/// SMOTE that also reports the parent row indices of every synthetic row.
///
/// Minority rows are visited round-robin as bases; each base draws one of its
/// `k` nearest minority neighbours (Euclidean, ties by row index) uniformly and
/// a gap `u ~ U[0, 1)`. Original rows come first and are unchanged; synthetic
/// rows get ids `synthetic-<n>`.
pub fn smote_traced(
    ds: &LabeledDataset,
    params: &SmoteParams,
) -> Result<(LabeledDataset, Vec<SyntheticOrigin>)> {
    params.validate()?;
    let (n0, n1) = ds.class_counts();
    let (minority_label, minority_n, majority_n) = if n1 <= n0 {
        (1u8, n1, n0)
    } else {
        (0u8, n0, n1)
    };
    let target = (params.target_ratio * majority_n as f64).floor() as usize;
    if minority_n >= target {
        return Ok((ds.clone(), Vec::new()));
    }
    if minority_n < 2 {
        return Err(Error::TooFewMinority(minority_n));
    }
    let minority: Vec<usize> = (0..ds.n_rows())
        .filter(|&i| ds.labels()[i] == minority_label)
        .collect();
    let k = params.k_neighbors.min(minority_n - 1);

    let space: Vec<Vec<f64>> = if params.standardize {
        let scaler = Scaler::fit(ds.features());
        minority
            .iter()
            .map(|&i| scaler.transform(&ds.features()[i]))
            .collect()
    } else {
        minority.iter().map(|&i| ds.features()[i].clone()).collect()
    };
    let neighbors: Vec<Vec<usize>> = (0..minority_n)
        .map(|a| {
            let mut d: Vec<(f64, usize)> = (0..minority_n)
                .filter(|&b| b != a)
                .map(|b| (squared_distance(&space[a], &space[b]), b))
                .collect();
            d.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            d.into_iter().take(k).map(|(_, b)| minority[b]).collect()
        })
        .collect();

    let mut out = ds.clone();
    let mut origins = Vec::with_capacity(target - minority_n);
    let mut r = rng::seeded(params.seed);
    for n in 0..target - minority_n {
        let slot = n % minority_n;
        let base = minority[slot];
        let neighbor = neighbors[slot][r.random_range(0..k)];
        let u: f64 = r.random();
        let row = interpolate(&ds.features()[base], &ds.features()[neighbor], u);
        out.push_row(row, minority_label, format!("synthetic-{n}"));
        origins.push(SyntheticOrigin { base, neighbor, u });
    }
    Ok((out, origins))
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `a + u·(b − a)`, clamped coordinate-wise into the parents' range.
fn interpolate(a: &[f64], b: &[f64], u: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x + u * (y - x)).clamp(x.min(y), x.max(y)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dataset(n_pos: usize, n_neg: usize, width: usize) -> LabeledDataset {
        let rows = (0..n_pos + n_neg)
            .map(|i| {
                (0..width)
                    .map(|j| ((i * 31 + j * 17) % 23) as f64 * 0.37 - (j as f64))
                    .collect()
            })
            .collect();
        let labels = (0..n_pos + n_neg).map(|i| u8::from(i < n_pos)).collect();
        LabeledDataset::from_rows(rows, labels).unwrap()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        squared_distance(a, b).sqrt()
    }

    #[test]
    fn balances_14_vs_94() {
        let ds = dataset(14, 94, 47);
        let (out, origins) = smote_traced(&ds, &SmoteParams::default()).unwrap();
        assert_eq!(out.class_counts(), (94, 94));
        assert_eq!(origins.len(), 80);
        assert_eq!(&out.features()[..108], ds.features());
        assert_eq!(out.trip_ids()[108], "synthetic-0");
        assert!(out.labels()[108..].iter().all(|&l| l == 1));
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let ds = dataset(5, 5, 3);
        assert_eq!(smote(&ds, &SmoteParams::default()).unwrap(), ds);
    }

    #[test]
    fn partial_ratio() {
        let ds = dataset(4, 20, 2);
        let p = SmoteParams {
            target_ratio: 0.5,
            ..Default::default()
        };
        assert_eq!(smote(&ds, &p).unwrap().class_counts(), (20, 10));
    }

    #[test]
    fn two_point_minority_stays_on_segment() {
        let ds = dataset(2, 30, 4);
        let out = smote(&ds, &SmoteParams::default()).unwrap();
        let (a, b) = (&ds.features()[0], &ds.features()[1]);
        for s in &out.features()[32..] {
            assert!((dist(a, s) + dist(s, b) - dist(a, b)).abs() < 1e-9);
        }
    }

    #[test]
    fn single_minority_errors() {
        let ds = dataset(1, 10, 2);
        assert!(matches!(
            smote(&ds, &SmoteParams::default()),
            Err(Error::TooFewMinority(1))
        ));
        let bad = SmoteParams {
            target_ratio: 1.5,
            ..Default::default()
        };
        assert!(smote(&dataset(3, 10, 2), &bad).is_err());
    }

    #[test]
    fn minority_can_be_class_zero() {
        let ds = dataset(20, 4, 2);
        let out = smote(&ds, &SmoteParams::default()).unwrap();
        assert_eq!(out.class_counts(), (20, 20));
        assert!(out.labels()[24..].iter().all(|&l| l == 0));
    }

    #[test]
    fn standardized_neighbors_still_interpolate_raw() {
        let ds = dataset(6, 20, 3);
        let p = SmoteParams {
            standardize: true,
            ..Default::default()
        };
        let (out, origins) = smote_traced(&ds, &p).unwrap();
        for (s, o) in out.features()[26..].iter().zip(&origins) {
            let (a, b) = (&ds.features()[o.base], &ds.features()[o.neighbor]);
            assert!((dist(a, s) + dist(s, b) - dist(a, b)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn synthetic_rows_lie_between_parents(n_pos in 2usize..12, n_neg in 12usize..40, k in 1usize..8, seed in 0u64..500) {
            let ds = dataset(n_pos, n_neg, 5);
            let p = SmoteParams { k_neighbors: k, seed, ..Default::default() };
            let (out, origins) = smote_traced(&ds, &p).unwrap();
            prop_assert_eq!(out.class_counts(), (n_neg, n_neg));
            for (s, o) in out.features()[n_pos + n_neg..].iter().zip(&origins) {
                let (a, b) = (&ds.features()[o.base], &ds.features()[o.neighbor]);
                prop_assert!(ds.labels()[o.base] == 1 && ds.labels()[o.neighbor] == 1);
                prop_assert!(o.base != o.neighbor);
                prop_assert!((dist(a, s) + dist(s, b) - dist(a, b)).abs() < 1e-9);
                for ((x, y), v) in a.iter().zip(b).zip(s) {
                    prop_assert!(x.min(*y) <= *v && *v <= x.max(*y));
                }
            }
            let again = smote(&ds, &p).unwrap();
            prop_assert!(again.features().iter().flatten().zip(out.features().iter().flatten()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
