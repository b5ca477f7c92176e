//! Classifiers: CART tree, random forest, logistic regression, RBF-kernel SVM.

mod forest;
mod logreg;
mod scaler;
mod svm;
mod tree;

pub use forest::{fit_random_forest, RandomForestModel, RandomForestParams};
pub use logreg::{
    fit_logistic_regression, fit_logistic_regression_traced, loss_and_gradient, LogRegParams,
    LogisticModel,
};
pub use scaler::Scaler;
pub use svm::{fit_svm_rbf, rbf_kernel, SvmModel, SvmParams};
pub use tree::{
    entropy, fit_decision_tree, gini, impurity_decrease, Criterion, DecisionTreeModel, Node,
    TreeParams,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A fitted binary classifier.
pub trait Classifier {
    /// Width of the feature vectors the model was trained on.
    fn n_features(&self) -> usize;

    /// Real-valued ranking score; larger means more likely positive.
    fn score(&self, x: &[f64]) -> f64;

    /// Class under the model's own decision rule.
    fn predict(&self, x: &[f64]) -> u8;
}

/// Any of the four supported models, tagged by `kind` on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    DecisionTree(DecisionTreeModel),
    RandomForest(RandomForestModel),
    LogisticRegression(LogisticModel),
    SvmRbf(SvmModel),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::DecisionTree(_) => "decision_tree",
            Model::RandomForest(_) => "random_forest",
            Model::LogisticRegression(_) => "logistic_regression",
            Model::SvmRbf(_) => "svm_rbf",
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::DecisionTree(m) => m,
            Model::RandomForest(m) => m,
            Model::LogisticRegression(m) => m,
            Model::SvmRbf(m) => m,
        }
    }
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        self.inner().n_features()
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.inner().score(x)
    }

    fn predict(&self, x: &[f64]) -> u8 {
        self.inner().predict(x)
    }
}

/// Returns the common row width.
pub(crate) fn check_training_data(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyData);
    }
    if x.len() != y.len() {
        return Err(Error::InvalidDataset(format!(
            "{} rows but {} labels",
            x.len(),
            y.len()
        )));
    }
    let width = x[0].len();
    if x.iter().any(|r| r.len() != width) {
        return Err(Error::InvalidDataset("ragged feature rows".into()));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::InvalidDataset("labels must be 0 or 1".into()));
    }
    Ok(width)
}

pub(crate) fn require_both_classes(y: &[u8]) -> Result<()> {
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}
