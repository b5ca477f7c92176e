//! Holdout splitting, confusion-matrix metrics, ROC/AUC and reports.

use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::learners::Classifier;
use crate::model::LabeledDataset;
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn new(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn from_predictions(labels: &[u8], predicted: &[u8]) -> Self {
        let mut cm = Self::default();
        for (&l, &p) in labels.iter().zip(predicted) {
            match (l, p) {
                (1, 1) => cm.tp += 1,
                (0, 1) => cm.fp += 1,
                (1, _) => cm.fn_ += 1,
                _ => cm.tn += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1. Zero denominators yield 0.
pub fn classification_metrics(cm: &ConfusionMatrix) -> Metrics {
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Metrics {
        accuracy: ratio(cm.tp + cm.tn, cm.total()),
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// (fpr, tpr) from (0, 0) to (1, 1); tied scores form one diagonal step.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve and trapezoidal AUC.
///
/// The area is accumulated in integer half-units, `Σ Δfp·(tp_prev + tp)`, and
/// divided by `2·P·N` once, so it equals the tie-aware concordance
/// `(concordant + ½·tied) / (P·N)`.
pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::InvalidDataset(format!(
            "{} labels but {} scores",
            labels.len(),
            scores.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidDataset("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area = 0u128;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - fp0) * u128::from(tp0 + tp);
        points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
    }
    let auc = twice_area as f64 / (2 * pos as u128 * neg as u128) as f64;
    Ok(RocCurve { points, auc })
}

/// Trapezoid rule over the (fpr, tpr) polyline.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Two-column `fpr,tpr` CSV.
pub fn write_roc_csv<W: Write>(sink: W, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["fpr", "tpr"])?;
    for (f, t) in points {
        w.write_record([f.to_string(), t.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-class shuffled holdout. Each class contributes
/// `round(test_fraction · count)` test rows, clamped to `[1, count − 1]`.
/// Both parts keep the input's row order.
pub fn stratified_split(
    ds: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    let mut test_mask = vec![false; ds.n_rows()];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..ds.n_rows())
            .filter(|&i| ds.labels()[i] == class)
            .collect();
        let count = idx.len();
        if count == 0 {
            return Err(Error::SingleClass);
        }
        if count < 2 {
            return Err(Error::TooFewSamples(format!(
                "class {class} has {count} member(s); a holdout split needs ≥ 2"
            )));
        }
        let n_test = ((test_fraction * count as f64).round() as usize).clamp(1, count - 1);
        idx.shuffle(&mut rng::derived(seed, u64::from(class)));
        for &i in &idx[..n_test] {
            test_mask[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..ds.n_rows()).partition(|&i| test_mask[i]);
    Ok((ds.subset_rows(&train), ds.subset_rows(&test)))
}

/// `k` stratified folds: each class is shuffled (seeded per class) and dealt
/// round-robin. Returns the test-row indices of each fold.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig("need at least 2 folds".into()));
    }
    let mut folds = vec![Vec::new(); k];
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.len() < k {
            return Err(Error::TooFewSamples(format!(
                "class {class} has {} member(s), fewer than {k} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng::derived(seed, u64::from(class)));
        for (j, i) in idx.into_iter().enumerate() {
            folds[j % k].push(i);
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub roc: Vec<(f64, f64)>,
}

/// Classes from the model's own decision rule, ROC from its scores.
pub fn evaluate_model(
    model: &dyn Classifier,
    test: &LabeledDataset,
    model_name: &str,
) -> Result<EvalReport> {
    if model.n_features() != test.n_features() {
        return Err(Error::WidthMismatch {
            expected: model.n_features(),
            found: test.n_features(),
        });
    }
    let scores: Vec<f64> = test.features().iter().map(|r| model.score(r)).collect();
    let predicted: Vec<u8> = test.features().iter().map(|r| model.predict(r)).collect();
    let confusion = ConfusionMatrix::from_predictions(test.labels(), &predicted);
    let m = classification_metrics(&confusion);
    let roc = roc_curve(test.labels(), &scores)?;
    Ok(EvalReport {
        model: model_name.to_string(),
        confusion,
        accuracy: m.accuracy,
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        auc: roc.auc,
        roc: roc.points,
    })
}
