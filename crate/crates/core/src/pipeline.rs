//! One-shot pipeline: clean → aggregate → split → select → SMOTE → fit →
//! evaluate.
//!
//! The default order fits selection and SMOTE on the training split only.
//! `paper_order` instead selects and oversamples the whole dataset before
//! splitting, which lets synthetic copies of test positives into training.

use serde::{Deserialize, Serialize};

use crate::aggregate::{build_dataset, AggregateOptions};
use crate::eval::{evaluate_model, stratified_split, EvalReport};
use crate::featselect::{
    pca_loading_select, rf_importance_select, rfecv, select_k_best, select_percentile, PcaParams,
    RfecvParams, SelectionResult,
};
use crate::ingest::{clean_and_group, CleaningReport};
use crate::learners::{
    fit_decision_tree, fit_logistic_regression, fit_random_forest, fit_svm_rbf, LogRegParams,
    Model, RandomForestParams, SvmParams, TreeParams,
};
use crate::model::{LabeledDataset, RawRecord};
use crate::resample::{smote, SmoteParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SelectionSpec {
    None,
    KBest {
        k: usize,
    },
    Percentile {
        percentile: f64,
    },
    PcaLoading(PcaParams),
    RfImportance {
        k: usize,
        forest: RandomForestParams,
    },
    Rfecv(RfecvParams),
}

impl SelectionSpec {
    pub fn apply(&self, ds: &LabeledDataset) -> Result<Option<SelectionResult>> {
        Ok(Some(match self {
            SelectionSpec::None => return Ok(None),
            SelectionSpec::KBest { k } => select_k_best(ds, *k)?,
            SelectionSpec::Percentile { percentile } => select_percentile(ds, *percentile)?,
            SelectionSpec::PcaLoading(p) => pca_loading_select(ds, p)?,
            SelectionSpec::RfImportance { k, forest } => rf_importance_select(ds, *k, forest)?,
            SelectionSpec::Rfecv(p) => rfecv(ds, p)?,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    DecisionTree(TreeParams),
    RandomForest(RandomForestParams),
    LogisticRegression(LogRegParams),
    SvmRbf(SvmParams),
}

impl ModelSpec {
    pub fn fit(&self, ds: &LabeledDataset) -> Result<Model> {
        let (x, y) = (ds.features(), ds.labels());
        Ok(match self {
            ModelSpec::DecisionTree(p) => Model::DecisionTree(
                fit_decision_tree(x, y, p)?.with_feature_names(ds.feature_names())?,
            ),
            ModelSpec::RandomForest(p) => Model::RandomForest(fit_random_forest(x, y, p)?),
            ModelSpec::LogisticRegression(p) => {
                Model::LogisticRegression(fit_logistic_regression(x, y, p)?)
            }
            ModelSpec::SvmRbf(p) => Model::SvmRbf(fit_svm_rbf(x, y, p)?),
        })
    }
}

/// A fitted model plus the column names it consumes, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub feature_names: Vec<String>,
    pub model: Model,
}

impl ModelFile {
    /// Projects `ds` onto this model's columns.
    pub fn project(&self, ds: &LabeledDataset) -> Result<LabeledDataset> {
        ds.select_named(&self.feature_names)
    }

    pub fn evaluate(&self, ds: &LabeledDataset) -> Result<EvalReport> {
        evaluate_model(&self.model, &self.project(ds)?, self.model.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub aggregate: AggregateOptions,
    pub selection: SelectionSpec,
    /// `None` disables oversampling.
    pub smote: Option<SmoteParams>,
    pub paper_order: bool,
    pub model: ModelSpec,
    pub test_fraction: f64,
    pub split_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            aggregate: AggregateOptions::default(),
            selection: SelectionSpec::KBest { k: 10 },
            smote: Some(SmoteParams::default()),
            paper_order: false,
            model: ModelSpec::DecisionTree(TreeParams::default()),
            test_fraction: 0.2,
            split_seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub cleaning: CleaningReport,
    /// Full aggregated dataset, before selection and oversampling.
    pub dataset: LabeledDataset,
    pub selection: Option<SelectionResult>,
    pub model: ModelFile,
    pub report: EvalReport,
    pub train_rows: usize,
    pub test_rows: usize,
}

fn select_and_project(
    spec: &SelectionSpec,
    ds: &LabeledDataset,
) -> Result<(Option<SelectionResult>, Vec<String>)> {
    let selection = spec.apply(ds)?;
    let names = match &selection {
        Some(s) => s
            .selected_indices
            .iter()
            .map(|&i| ds.feature_names()[i].clone())
            .collect(),
        None => ds.feature_names().to_vec(),
    };
    Ok((selection, names))
}

fn oversample(ds: LabeledDataset, params: &Option<SmoteParams>) -> Result<LabeledDataset> {
    match params {
        Some(p) => smote(&ds, p),
        None => Ok(ds),
    }
}

pub fn run_pipeline(records: Vec<RawRecord>, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let (trips, cleaning) = clean_and_group(records)?;
    let dataset = build_dataset(&trips, &cfg.aggregate)?;

    let (selection, names, train, test) = if cfg.paper_order {
        let (selection, names) = select_and_project(&cfg.selection, &dataset)?;
        let resampled = oversample(dataset.select_named(&names)?, &cfg.smote)?;
        let (train, test) = stratified_split(&resampled, cfg.test_fraction, cfg.split_seed)?;
        (selection, names, train, test)
    } else {
        let (train, test) = stratified_split(&dataset, cfg.test_fraction, cfg.split_seed)?;
        let (selection, names) = select_and_project(&cfg.selection, &train)?;
        let train = oversample(train.select_named(&names)?, &cfg.smote)?;
        let test = test.select_named(&names)?;
        (selection, names, train, test)
    };

    let model = ModelFile {
        model: cfg.model.fit(&train)?,
        feature_names: names,
    };
    let report = model.evaluate(&test)?;
    if report.confusion.total() != test.n_rows() {
        return Err(Error::InvalidDataset(
            "confusion matrix does not cover the test set".into(),
        ));
    }
    Ok(PipelineOutput {
        cleaning,
        dataset,
        selection,
        model,
        report,
        train_rows: train.n_rows(),
        test_rows: test.n_rows(),
    })
}
