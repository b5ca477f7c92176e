//! Feature selection: ANOVA-F K-best and percentile, PCA loading ranking,
//! random-forest importance, and recursive elimination with cross-validation.

use std::cmp::Ordering;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{classification_metrics, stratified_folds, ConfusionMatrix};
use crate::learners::{
    fit_decision_tree, fit_random_forest, require_both_classes, Classifier, RandomForestParams,
    TreeParams,
};
use crate::model::LabeledDataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    KBest,
    Percentile,
    PcaLoading,
    RfImportance,
    Rfecv,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    /// Indices into the input columns. Ranked best-first for the scoring
    /// methods, ascending for RFECV.
    pub selected_indices: Vec<usize>,
    /// One score per input column; `None` for RFECV.
    pub scores: Option<Vec<f64>>,
    /// RFECV only: `(subset size, mean CV F1)` in elimination order.
    pub cv_curve: Option<Vec<(usize, f64)>>,
}

impl SelectionResult {
    /// `{method, selected: [names], scores: {name: value}}`. Infinite F
    /// scores are written as the string `"inf"` since JSON has no infinity.
    pub fn to_json(&self, feature_names: &[String]) -> serde_json::Value {
        use serde_json::{json, Map, Value};
        let selected: Vec<&str> = self
            .selected_indices
            .iter()
            .map(|&i| feature_names[i].as_str())
            .collect();
        let scores = self.scores.as_ref().map(|s| {
            let mut m = Map::new();
            for (name, &v) in feature_names.iter().zip(s) {
                let v = if v.is_finite() {
                    json!(v)
                } else {
                    json!("inf")
                };
                m.insert(name.clone(), v);
            }
            Value::Object(m)
        });
        let mut out = json!({
            "method": self.method,
            "selected": selected,
            "scores": scores,
        });
        if let Some(curve) = &self.cv_curve {
            out["cv_f1_by_size"] = json!(curve);
        }
        out
    }

    /// Inverse of [`to_json`](Self::to_json) for the `selected` names.
    pub fn selected_names_from_json(v: &serde_json::Value) -> Result<Vec<String>> {
        v["selected"]
            .as_array()
            .ok_or_else(|| Error::InvalidConfig("selection file lacks `selected`".into()))?
            .iter()
            .map(|s| {
                s.as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::InvalidConfig("non-string feature name".into()))
            })
            .collect()
    }
}

/// Indices sorted by descending score, ties by lower index.
fn rank_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| match scores[b].total_cmp(&scores[a]) {
        Ordering::Equal => a.cmp(&b),
        o => o,
    });
    idx
}

fn check_k(k: usize, width: usize) -> Result<()> {
    if k == 0 || k > width {
        return Err(Error::InvalidConfig(format!(
            "k = {k} outside [1, {width}]"
        )));
    }
    Ok(())
}

/// One-way ANOVA F statistic per feature for the two label groups.
///
/// A feature constant within both classes scores `+∞` unless it is constant
/// overall, in which case it scores 0.
pub fn f_classif(ds: &LabeledDataset) -> Result<Vec<f64>> {
    require_both_classes(ds.labels())?;
    let labels = ds.labels();
    let n = ds.n_rows() as f64;
    Ok((0..ds.n_features())
        .map(|j| {
            let col = ds.column(j);
            let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            for (&v, &l) in col.iter().zip(labels) {
                groups[l as usize].push(v);
            }
            let constant = |g: &[f64]| g.iter().all(|&v| v == g[0]);
            if constant(&col) {
                return 0.0;
            }
            if constant(&groups[0]) && constant(&groups[1]) {
                return f64::INFINITY;
            }
            let grand = col.iter().sum::<f64>() / n;
            let (mut ssb, mut ssw) = (0.0, 0.0);
            for g in &groups {
                let m = g.iter().sum::<f64>() / g.len() as f64;
                ssb += g.len() as f64 * (m - grand) * (m - grand);
                ssw += g.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
            }
            // two groups: df_between = 1, df_within = n − 2
            let msw = ssw / (n - 2.0);
            ssb / msw
        })
        .collect())
}

/// The `k` features with the highest F score.
pub fn select_k_best(ds: &LabeledDataset, k: usize) -> Result<SelectionResult> {
    check_k(k, ds.n_features())?;
    let scores = f_classif(ds)?;
    let mut selected = rank_desc(&scores);
    selected.truncate(k);
    Ok(SelectionResult {
        method: SelectionMethod::KBest,
        selected_indices: selected,
        scores: Some(scores),
        cv_curve: None,
    })
}

/// Number of features kept by a percentile: `⌈p/100 · width⌉`, at least 1.
pub fn percentile_count(percentile: f64, width: usize) -> usize {
    // The small slack keeps exact products such as 100% · 47 from rounding up.
    let raw = percentile * width as f64 / 100.0;
    ((raw - 1e-9).ceil() as usize).clamp(1, width)
}

/// Top `⌈percentile/100 · width⌉` features by F score.
pub fn select_percentile(ds: &LabeledDataset, percentile: f64) -> Result<SelectionResult> {
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::InvalidConfig(format!(
            "percentile {percentile} outside (0, 100]"
        )));
    }
    let mut r = select_k_best(ds, percentile_count(percentile, ds.n_features()))?;
    r.method = SelectionMethod::Percentile;
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PcaParams {
    pub n_components: usize,
    pub k: usize,
    /// Rank on the correlation structure (z-scored columns) rather than the
    /// raw covariance.
    pub standardize: bool,
}

impl Default for PcaParams {
    fn default() -> Self {
        Self {
            n_components: 5,
            k: 10,
            standardize: true,
        }
    }
}

/// Principal axes of a column-centred matrix, largest eigenvalue first.
#[derive(Debug, Clone)]
pub struct PcaBasis {
    pub eigenvalues: Vec<f64>,
    /// `components[i][j]` is the loading of feature j on component i. Each
    /// component's largest-magnitude loading is positive.
    pub components: Vec<Vec<f64>>,
}

/// Sample covariance (divisor n − 1) of the prepared columns.
pub fn pca_covariance(ds: &LabeledDataset, standardize: bool) -> Result<DMatrix<f64>> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::DegenerateMatrix(format!(
            "{n} row(s); PCA needs ≥ 2"
        )));
    }
    let p = ds.n_features();
    let mut z = DMatrix::<f64>::zeros(n, p);
    for j in 0..p {
        let col = ds.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let constant = col.iter().all(|&v| v == col[0]);
        let scale = if standardize && !constant {
            (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt()
        } else {
            1.0
        };
        for i in 0..n {
            z[(i, j)] = if constant {
                0.0
            } else {
                (col[i] - mean) / scale
            };
        }
    }
    Ok(z.transpose() * &z / (n as f64 - 1.0))
}

pub fn pca_basis(cov: DMatrix<f64>) -> PcaBasis {
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut components = Vec::with_capacity(order.len());
    for i in order {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        let pivot = v.iter().enumerate().fold(
            0,
            |best, (j, x)| if x.abs() > v[best].abs() { j } else { best },
        );
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        eigenvalues.push(eig.eigenvalues[i].max(0.0));
        components.push(v);
    }
    PcaBasis {
        eigenvalues,
        components,
    }
}

/// Feature score `max_i |loading_ij| · explained_ratio_i` over the top
/// components.
pub fn pca_loading_scores(basis: &PcaBasis, n_components: usize) -> Vec<f64> {
    let p = basis.components.first().map_or(0, Vec::len);
    let total: f64 = basis.eigenvalues.iter().sum();
    if total <= 0.0 {
        return vec![0.0; p];
    }
    (0..p)
        .map(|j| {
            (0..n_components)
                .map(|i| basis.components[i][j].abs() * basis.eigenvalues[i] / total)
                .fold(0.0, f64::max)
        })
        .collect()
}

/// PCA used as a feature ranking: keeps original columns with the strongest
/// weighted loadings.
pub fn pca_loading_select(ds: &LabeledDataset, params: &PcaParams) -> Result<SelectionResult> {
    let cov = pca_covariance(ds, params.standardize)?;
    let p = ds.n_features();
    if params.n_components == 0 || params.n_components > ds.n_rows().min(p) {
        return Err(Error::InvalidConfig(format!(
            "n_components = {} outside [1, {}]",
            params.n_components,
            ds.n_rows().min(p)
        )));
    }
    check_k(params.k, p)?;
    let scores = pca_loading_scores(&pca_basis(cov), params.n_components);
    let mut selected = rank_desc(&scores);
    selected.truncate(params.k);
    Ok(SelectionResult {
        method: SelectionMethod::PcaLoading,
        selected_indices: selected,
        scores: Some(scores),
        cv_curve: None,
    })
}

/// Top `k` by normalized forest importance. A forest that never splits
/// yields all-zero scores, and the ranking falls back to column order.
pub fn rf_importance_select(
    ds: &LabeledDataset,
    k: usize,
    forest: &RandomForestParams,
) -> Result<SelectionResult> {
    check_k(k, ds.n_features())?;
    let model = fit_random_forest(ds.features(), ds.labels(), forest)?;
    let scores = model.feature_importances();
    let mut selected = rank_desc(&scores);
    selected.truncate(k);
    Ok(SelectionResult {
        method: SelectionMethod::RfImportance,
        selected_indices: selected,
        scores: Some(scores),
        cv_curve: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfecvParams {
    pub tree: TreeParams,
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for RfecvParams {
    fn default() -> Self {
        Self {
            tree: TreeParams::default(),
            n_folds: 5,
            seed: 42,
        }
    }
}

fn cv_f1(
    ds: &LabeledDataset,
    cols: &[usize],
    folds: &[Vec<usize>],
    tree: &TreeParams,
) -> Result<f64> {
    let x: Vec<Vec<f64>> = ds
        .features()
        .iter()
        .map(|r| cols.iter().map(|&j| r[j]).collect())
        .collect();
    let y = ds.labels();
    let per_fold = folds
        .par_iter()
        .map(|test| {
            let mut in_test = vec![false; x.len()];
            test.iter().for_each(|&i| in_test[i] = true);
            let train: Vec<usize> = (0..x.len()).filter(|&i| !in_test[i]).collect();
            let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
            let ty: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            let model = fit_decision_tree(&tx, &ty, tree)?;
            let labels: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            let preds: Vec<u8> = test.iter().map(|&i| model.predict(&x[i])).collect();
            Ok(classification_metrics(&ConfusionMatrix::from_predictions(&labels, &preds)).f1)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_fold.iter().sum::<f64>() / per_fold.len() as f64)
}

/// Recursive feature elimination (step 1) scored by mean stratified k-fold F1
/// of the positive class. Returns the smallest subset reaching the best
/// score. Among equal-importance features the highest column index is
/// eliminated first.
pub fn rfecv(ds: &LabeledDataset, params: &RfecvParams) -> Result<SelectionResult> {
    params.tree.validate()?;
    let folds = stratified_folds(ds.labels(), params.n_folds, params.seed)?;
    let mut current: Vec<usize> = (0..ds.n_features()).collect();
    let mut curve = Vec::with_capacity(current.len());
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let score = cv_f1(ds, &current, &folds, &params.tree)?;
        curve.push((current.len(), score));
        // Later (smaller) subsets win ties.
        if best.as_ref().is_none_or(|(b, _)| score >= *b) {
            best = Some((score, current.clone()));
        }
        if current.len() == 1 {
            break;
        }
        let x: Vec<Vec<f64>> = ds
            .features()
            .iter()
            .map(|r| current.iter().map(|&j| r[j]).collect())
            .collect();
        let importances = fit_decision_tree(&x, ds.labels(), &params.tree)?.raw_importances();
        let drop = (0..current.len())
            .min_by(|&a, &b| importances[a].total_cmp(&importances[b]).then(b.cmp(&a)))
            .expect("non-empty");
        current.remove(drop);
    }
    let (_, mut selected) = best.expect("at least one subset scored");
    selected.sort_unstable();
    Ok(SelectionResult {
        method: SelectionMethod::Rfecv,
        selected_indices: selected,
        scores: None,
        cv_curve: Some(curve),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn ds(cols: Vec<Vec<f64>>, labels: Vec<u8>) -> LabeledDataset {
        let n = labels.len();
        let rows = (0..n)
            .map(|i| cols.iter().map(|c| c[i]).collect())
            .collect();
        LabeledDataset::from_rows(rows, labels).unwrap()
    }

    #[test]
    fn anova_hand_values() {
        let d = ds(vec![vec![1.0, 2.0, 3.0, 4.0]], vec![0, 0, 1, 1]);
        assert!((f_classif(&d).unwrap()[0] - 8.0).abs() < 1e-12);
        let d = ds(vec![vec![5.0; 4]], vec![0, 0, 1, 1]);
        assert_eq!(f_classif(&d).unwrap()[0], 0.0);
        let d = ds(vec![vec![1.0, 1.0, 3.0, 3.0]], vec![0, 0, 1, 1]);
        assert_eq!(f_classif(&d).unwrap()[0], f64::INFINITY);
        let d = ds(vec![vec![1.0, 2.0]], vec![1, 1]);
        assert!(matches!(f_classif(&d), Err(Error::SingleClass)));
    }

    #[test]
    fn k_best_prefers_signal() {
        let d = ds(
            vec![vec![0.3, 0.1, 0.2, 0.4], vec![1.0, 2.0, 3.0, 4.0]],
            vec![0, 0, 1, 1],
        );
        let f = f_classif(&d).unwrap();
        // noise: group means 0.2 and 0.3, grand 0.25 → SSB 0.01, SSW 0.04, F 0.5
        assert!((f[0] - 0.5).abs() < 1e-12);
        let r = select_k_best(&d, 1).unwrap();
        assert_eq!(r.selected_indices, vec![1]);
        let all = select_k_best(&d, 2).unwrap();
        assert_eq!(all.selected_indices, vec![1, 0]);
        assert!(select_k_best(&d, 3).is_err());
    }

    #[test]
    fn percentile_counts() {
        assert_eq!(percentile_count(100.0, 47), 47);
        assert_eq!(percentile_count(23.4, 47), 11);
        assert_eq!(percentile_count(1.0, 47), 1);
        assert_eq!(percentile_count(50.0, 4), 2);
        assert_eq!(percentile_count(50.1, 4), 3);
    }

    #[test]
    fn duplicated_columns_tie_to_lower_index() {
        let mut r = rng::seeded(5);
        let a: Vec<f64> = (0..30).map(|_| r.random::<f64>()).collect();
        let b: Vec<f64> = (0..30).map(|_| r.random::<f64>() * 0.01).collect();
        let labels = (0..30).map(|i| u8::from(i % 3 == 0)).collect();
        let d = ds(vec![b.clone(), a.clone(), a], labels);
        let res = pca_loading_select(
            &d,
            &PcaParams {
                n_components: 1,
                k: 1,
                standardize: false,
            },
        )
        .unwrap();
        let s = res.scores.unwrap();
        assert!((s[1] - s[2]).abs() < 1e-12);
        assert_eq!(res.selected_indices, vec![1]);
    }

    #[test]
    fn pca_needs_two_rows() {
        let d = ds(vec![vec![1.0]], vec![1]);
        assert!(matches!(
            pca_loading_select(
                &d,
                &PcaParams {
                    n_components: 1,
                    k: 1,
                    standardize: true
                }
            ),
            Err(Error::DegenerateMatrix(_))
        ));
    }

    #[test]
    fn constant_features_give_uniform_index_ranking() {
        let d = ds(
            vec![vec![1.0; 10], vec![2.0; 10], vec![3.0; 10]],
            (0..10).map(|i| u8::from(i < 5)).collect(),
        );
        let p = RandomForestParams {
            n_trees: 5,
            ..Default::default()
        };
        let r = rf_importance_select(&d, 3, &p).unwrap();
        assert_eq!(r.selected_indices, vec![0, 1, 2]);
        assert!(r.scores.unwrap().iter().all(|&s| s == 0.0));
        let pca = pca_loading_select(
            &d,
            &PcaParams {
                n_components: 1,
                k: 2,
                standardize: true,
            },
        )
        .unwrap();
        assert_eq!(pca.selected_indices, vec![0, 1]);
    }

    #[test]
    fn json_shape() {
        let d = ds(
            vec![vec![1.0, 1.0, 3.0, 3.0], vec![1.0, 2.0, 3.0, 4.0]],
            vec![0, 0, 1, 1],
        );
        let r = select_k_best(&d, 1).unwrap();
        let v = r.to_json(d.feature_names());
        assert_eq!(v["method"], "k_best");
        assert_eq!(v["selected"][0], "f0");
        assert_eq!(v["scores"]["f0"], "inf");
        assert_eq!(v["scores"]["f1"], 8.0);
        assert_eq!(
            SelectionResult::selected_names_from_json(&v).unwrap(),
            vec!["f0"]
        );
    }
}
