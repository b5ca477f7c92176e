//! Python bindings. Feature matrices are plain lists of float lists;
//! structured results come back as dicts or JSON strings.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tripsense_core as ts;
use ts::eval::{ConfusionMatrix, Metrics};
use ts::ingest::{Influence, UtcOffset};
use ts::learners::{Classifier, Criterion, DecisionTreeModel, TreeParams};
use ts::pipeline::{run_pipeline as run, ModelSpec, PipelineConfig};
use ts::LabeledDataset;

create_exception!(tripsense, TripsenseError, PyException);

fn err(e: ts::Error) -> PyErr {
    TripsenseError::new_err(e.to_string())
}

fn dataset(x: Vec<Vec<f64>>, y: Vec<u8>) -> PyResult<LabeledDataset> {
    LabeledDataset::from_rows(x, y).map_err(err)
}

/// Row positions recovered from the `row-<i>` ids that `from_rows` assigns.
fn row_positions(ds: &LabeledDataset) -> Vec<usize> {
    ds.trip_ids()
        .iter()
        .map(|id| {
            id.trim_start_matches("row-")
                .parse()
                .expect("fixture row id")
        })
        .collect()
}

fn metrics_dict<'py>(py: Python<'py>, m: &Metrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("accuracy", m.accuracy)?;
    d.set_item("precision", m.precision)?;
    d.set_item("recall", m.recall)?;
    d.set_item("f1", m.f1)?;
    Ok(d)
}

#[pyfunction]
fn canonical_feature_names() -> Vec<String> {
    ts::canonical_feature_names()
}

/// 1 for alcohol, 0 for any other report, None when missing or invalid.
#[pyfunction]
#[pyo3(signature = (raw))]
fn encode_influence(raw: Option<&str>) -> Option<u8> {
    match ts::ingest::encode_influence(raw) {
        Influence::Valid(v) => Some(v),
        Influence::Invalid | Influence::Missing => None,
    }
}

/// `(hour_of_day, day_of_week)` with Monday = 0.
#[pyfunction]
#[pyo3(signature = (tick_timestamp, utc_offset_minutes = 60))]
fn decompose_timestamp(tick_timestamp: i64, utc_offset_minutes: i32) -> PyResult<(f64, u8)> {
    let offset = UtcOffset::from_minutes(utc_offset_minutes).map_err(err)?;
    Ok(ts::ingest::decompose_timestamp(tick_timestamp, offset))
}

#[pyfunction]
fn gini(negatives: usize, positives: usize) -> f64 {
    ts::learners::gini([negatives, positives])
}

#[pyfunction]
#[pyo3(name = "classification_metrics")]
fn classification_metrics_py<'py>(
    py: Python<'py>,
    tp: usize,
    fp: usize,
    fn_: usize,
    tn: usize,
) -> PyResult<Bound<'py, PyDict>> {
    metrics_dict(
        py,
        &ts::eval::classification_metrics(&ConfusionMatrix::new(tp, fp, fn_, tn)),
    )
}

/// `(points, auc)` where points are `(fpr, tpr)` pairs.
#[pyfunction]
fn roc_curve(labels: Vec<u8>, scores: Vec<f64>) -> PyResult<(Vec<(f64, f64)>, f64)> {
    let r = ts::eval::roc_curve(&labels, &scores).map_err(err)?;
    Ok((r.points, r.auc))
}

/// ANOVA F per column. Infinite for columns that are constant within
/// each class but differ between them.
#[pyfunction]
fn f_classif(x: Vec<Vec<f64>>, y: Vec<u8>) -> PyResult<Vec<f64>> {
    ts::featselect::f_classif(&dataset(x, y)?).map_err(err)
}

/// `(train_rows, test_rows)` as row indices into the input.
#[pyfunction]
#[pyo3(signature = (x, y, test_fraction = 0.2, seed = 42))]
fn stratified_split(
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    test_fraction: f64,
    seed: u64,
) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let (train, test) =
        ts::eval::stratified_split(&dataset(x, y)?, test_fraction, seed).map_err(err)?;
    Ok((row_positions(&train), row_positions(&test)))
}

/// Oversampled `(x, y)`; originals first, synthetic rows appended.
#[pyfunction]
#[pyo3(signature = (x, y, k_neighbors = 5, seed = 42, target_ratio = 1.0))]
fn smote(
    x: Vec<Vec<f64>>,
    y: Vec<u8>,
    k_neighbors: usize,
    seed: u64,
    target_ratio: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<u32>)> {
    let params = ts::resample::SmoteParams {
        k_neighbors,
        seed,
        target_ratio,
        ..Default::default()
    };
    let out = ts::resample::smote(&dataset(x, y)?, &params).map_err(err)?;
    Ok((
        out.features().to_vec(),
        out.labels().iter().map(|&l| u32::from(l)).collect(),
    ))
}

/// Writes `corpus.csv` and `truth.csv` under `out_dir`; returns
/// `{trip_id: label}`.
#[pyfunction]
#[pyo3(signature = (out_dir, trips = 108, positive = 14, seed = 42, strength = 1.0))]
fn generate_corpus(
    out_dir: PathBuf,
    trips: usize,
    positive: usize,
    seed: u64,
    strength: f64,
) -> PyResult<std::collections::BTreeMap<String, u8>> {
    let cfg = ts::synthgen::GenConfig {
        n_trips: trips,
        n_positive: positive,
        seed,
        signature_strength: strength,
        ..Default::default()
    };
    let (records, truth) = ts::synthgen::generate_corpus(&cfg).map_err(err)?;
    fs::create_dir_all(&out_dir)?;
    ts::ingest::write_sensor_csv(
        BufWriter::new(File::create(out_dir.join("corpus.csv"))?),
        &records,
    )
    .map_err(err)?;
    ts::synthgen::write_truth_csv(
        BufWriter::new(File::create(out_dir.join("truth.csv"))?),
        &truth,
    )
    .map_err(err)?;
    Ok(truth)
}

/// Runs the default pipeline (k-best 10, SMOTE on the training split,
/// depth-5 tree) over sensor CSV files; returns the evaluation report as
/// JSON text.
#[pyfunction]
#[pyo3(signature = (paths, seed = 42, paper_order = false))]
fn run_pipeline(paths: Vec<PathBuf>, seed: u64, paper_order: bool) -> PyResult<String> {
    let mut records = Vec::new();
    for p in &paths {
        records.extend(ts::ingest::parse_sensor_csv(File::open(p)?).map_err(err)?);
    }
    let cfg = PipelineConfig {
        paper_order,
        split_seed: seed,
        model: ModelSpec::DecisionTree(TreeParams {
            seed,
            ..Default::default()
        }),
        ..Default::default()
    };
    let out = run(records, &cfg).map_err(err)?;
    serde_json::to_string(&out.report).map_err(|e| err(e.into()))
}

/// CART classifier (binary labels, `x ≤ threshold` goes left).
#[pyclass(module = "tripsense", frozen)]
struct DecisionTree {
    inner: DecisionTreeModel,
}

#[pymethods]
impl DecisionTree {
    #[staticmethod]
    #[pyo3(signature = (x, y, max_depth = 5, min_samples_split = 10, min_samples_leaf = 5, criterion = "gini"))]
    fn fit(
        x: Vec<Vec<f64>>,
        y: Vec<u8>,
        max_depth: usize,
        min_samples_split: usize,
        min_samples_leaf: usize,
        criterion: &str,
    ) -> PyResult<Self> {
        let criterion = match criterion {
            "gini" => Criterion::Gini,
            "entropy" => Criterion::Entropy,
            other => {
                return Err(TripsenseError::new_err(format!(
                    "unknown criterion {other:?}"
                )))
            }
        };
        let params = TreeParams {
            max_depth,
            min_samples_split,
            min_samples_leaf,
            criterion,
            ..Default::default()
        };
        let inner = ts::learners::fit_decision_tree(&x, &y, &params).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| err(e.into()))?;
        Ok(Self { inner })
    }

    // u32 so Python sees a list of ints, not bytes.
    fn predict(&self, x: Vec<Vec<f64>>) -> Vec<u32> {
        x.iter().map(|r| u32::from(self.inner.predict(r))).collect()
    }

    /// Leaf positive fraction per row.
    fn score(&self, x: Vec<Vec<f64>>) -> Vec<f64> {
        x.iter().map(|r| self.inner.score(r)).collect()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.inner.depth()
    }

    #[getter]
    fn n_leaves(&self) -> usize {
        self.inner.n_leaves()
    }

    #[getter]
    fn feature_importances(&self) -> Vec<f64> {
        self.inner.feature_importances()
    }

    fn to_dot(&self) -> String {
        ts::dot::export_tree_dot(&self.inner)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| err(e.into()))
    }

    fn __repr__(&self) -> String {
        format!(
            "DecisionTree(depth={}, leaves={})",
            self.inner.depth(),
            self.inner.n_leaves()
        )
    }
}

#[pymodule]
fn tripsense(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("TripsenseError", m.py().get_type::<TripsenseError>())?;
    m.add("N_FEATURES", ts::N_FEATURES)?;
    m.add_class::<DecisionTree>()?;
    m.add_function(wrap_pyfunction!(canonical_feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(encode_influence, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_timestamp, m)?)?;
    m.add_function(wrap_pyfunction!(gini, m)?)?;
    m.add_function(wrap_pyfunction!(classification_metrics_py, m)?)?;
    m.add_function(wrap_pyfunction!(roc_curve, m)?)?;
    m.add_function(wrap_pyfunction!(f_classif, m)?)?;
    m.add_function(wrap_pyfunction!(stratified_split, m)?)?;
    m.add_function(wrap_pyfunction!(smote, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
