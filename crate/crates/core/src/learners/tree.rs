//! CART classification tree with pre-pruning.

use std::cmp::Ordering;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::learners::{check_training_data, Classifier};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
    Entropy,
}

impl Criterion {
    pub fn impurity(self, counts: [usize; 2]) -> f64 {
        match self {
            Criterion::Gini => gini(counts),
            Criterion::Entropy => entropy(counts),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Recorded for provenance. A plain tree evaluates every feature at every
    /// node and consumes no randomness; forests derive per-tree seeds.
    pub seed: u64,
    #[serde(default)]
    pub criterion: Criterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 5,
            min_samples_split: 10,
            min_samples_leaf: 5,
            seed: 42,
            criterion: Criterion::Gini,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth < 1 || self.min_samples_split < 2 || self.min_samples_leaf < 1 {
            return Err(Error::InvalidConfig(format!(
                "tree params need max_depth ≥ 1, min_samples_split ≥ 2, min_samples_leaf ≥ 1; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// 1 − p0² − p1².
pub fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

/// Shannon entropy in bits.
pub fn entropy(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Weighted impurity decrease of splitting `parent` into `left` + `right`.
pub fn impurity_decrease(criterion: Criterion, left: [usize; 2], right: [usize; 2]) -> f64 {
    let parent = [left[0] + right[0], left[1] + right[1]];
    let n = (parent[0] + parent[1]) as f64;
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    criterion.impurity(parent)
        - (nl / n) * criterion.impurity(left)
        - (nr / n) * criterion.impurity(right)
}

/// Split quality used for ranking candidates at one node.
///
/// For Gini the decrease equals `(Σ_side (c0² + c1²)/n_side − S/n) / n`, so at a
/// fixed node candidates rank by `Σ_side (c0² + c1²)/n_side`, which is compared
/// exactly as a fraction. Entropy falls back to floating point.
#[derive(Debug, Clone, Copy)]
enum Quality {
    Exact { num: u128, den: u128 },
    Real(f64),
}

impl Quality {
    fn of(criterion: Criterion, left: [usize; 2], right: [usize; 2]) -> Self {
        match criterion {
            Criterion::Gini => {
                let sq = |c: [usize; 2]| (c[0] * c[0] + c[1] * c[1]) as u128;
                let nl = (left[0] + left[1]) as u128;
                let nr = (right[0] + right[1]) as u128;
                Quality::Exact {
                    num: sq(left) * nr + sq(right) * nl,
                    den: nl * nr,
                }
            }
            Criterion::Entropy => Quality::Real(impurity_decrease(criterion, left, right)),
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Quality::Exact { num: a, den: b }, Quality::Exact { num: c, den: d }) => {
                (a * d).cmp(&(c * b))
            }
            (Quality::Real(a), Quality::Real(b)) => a.total_cmp(b),
            _ => unreachable!("one criterion per fit"),
        }
    }

    /// Strictly positive impurity decrease relative to `parent`.
    fn improves(&self, parent: [usize; 2]) -> bool {
        match *self {
            Quality::Exact { num, den } => {
                let n = (parent[0] + parent[1]) as u128;
                let s = (parent[0] * parent[0] + parent[1] * parent[1]) as u128;
                num * n > s * den
            }
            Quality::Real(gain) => gain > 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        counts: [usize; 2],
    },
    Leaf {
        counts: [usize; 2],
    },
}

impl Node {
    pub fn counts(&self) -> [usize; 2] {
        match self {
            Node::Split { counts, .. } | Node::Leaf { counts } => *counts,
        }
    }

    pub fn n_samples(&self) -> usize {
        let c = self.counts();
        c[0] + c[1]
    }
}

/// Fitted CART tree. Node 0 is the root; children are created in preorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeFile", try_from = "TreeFile")]
pub struct DecisionTreeModel {
    nodes: Vec<Node>,
    n_features: usize,
    feature_names: Vec<String>,
    criterion: Criterion,
}

/// Per-node random feature subsets, used by random forests.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FeatureSampling {
    pub per_split: usize,
    pub seed: u64,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    params: &'a TreeParams,
    sampling: Option<FeatureSampling>,
    n_features: usize,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8)>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    quality: Quality,
}

fn class_counts(y: &[u8], rows: &[usize]) -> [usize; 2] {
    let pos = rows.iter().filter(|&&i| y[i] == 1).count();
    [rows.len() - pos, pos]
}

/// Midpoint of two consecutive distinct values; falls back to `lo` when the
/// midpoint rounds up to `hi` so that `lo ≤ t < hi` always holds.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

impl Builder<'_> {
    fn candidate_features(&self, node_id: usize) -> Vec<usize> {
        match self.sampling {
            Some(s) if s.per_split < self.n_features => {
                let mut r = rng::derived(s.seed, node_id as u64);
                let mut f = index::sample(&mut r, self.n_features, s.per_split).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..self.n_features).collect(),
        }
    }

    fn best_split(&mut self, rows: &[usize], features: &[usize]) -> Option<Candidate> {
        let n = rows.len();
        let min_leaf = self.params.min_samples_leaf;
        let criterion = self.params.criterion;
        let total = class_counts(self.y, rows);
        let mut best: Option<Candidate> = None;
        for &f in features {
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&i| (self.x[i][f], self.y[i])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = [0usize; 2];
            for i in 1..n {
                left[self.scratch[i - 1].1 as usize] += 1;
                let (lo, hi) = (self.scratch[i - 1].0, self.scratch[i].0);
                if lo == hi || i < min_leaf || n - i < min_leaf {
                    continue;
                }
                let right = [total[0] - left[0], total[1] - left[1]];
                let quality = Quality::of(criterion, left, right);
                let better = match &best {
                    None => true,
                    Some(b) => quality.cmp(&b.quality) == Ordering::Greater,
                };
                if better {
                    best = Some(Candidate {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        quality,
                    });
                }
            }
        }
        best.filter(|b| b.quality.improves(total))
    }

    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = class_counts(self.y, &rows);
        self.nodes.push(Node::Leaf { counts });

        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.params.max_depth || rows.len() < self.params.min_samples_split {
            return id;
        }
        let features = self.candidate_features(id);
        let Some(split) = self.best_split(&rows, &features) else {
            return id;
        };
        let (l_rows, r_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[i][split.feature] <= split.threshold);
        let left = self.build(l_rows, depth + 1);
        let right = self.build(r_rows, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            counts,
        };
        id
    }
}

/// Greedy CART fit on all rows with every feature considered at every node.
pub fn fit_decision_tree(
    x: &[Vec<f64>],
    y: &[u8],
    params: &TreeParams,
) -> Result<DecisionTreeModel> {
    let rows: Vec<usize> = (0..x.len()).collect();
    fit_rows(x, y, rows, params, None)
}

pub(crate) fn fit_rows(
    x: &[Vec<f64>],
    y: &[u8],
    rows: Vec<usize>,
    params: &TreeParams,
    sampling: Option<FeatureSampling>,
) -> Result<DecisionTreeModel> {
    let n_features = check_training_data(x, y)?;
    params.validate()?;
    let mut b = Builder {
        x,
        y,
        params,
        sampling,
        n_features,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    b.build(rows, 0);
    Ok(DecisionTreeModel {
        nodes: b.nodes,
        n_features,
        feature_names: (0..n_features).map(|j| format!("f{j}")).collect(),
        criterion: params.criterion,
    })
}

impl DecisionTreeModel {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Attaches column names for rendering. Width must match.
    pub fn with_feature_names(mut self, names: &[String]) -> Result<Self> {
        if names.len() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                found: names.len(),
            });
        }
        self.feature_names = names.to_vec();
        Ok(self)
    }

    fn leaf_for(&self, x: &[f64]) -> [usize; 2] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf { counts } => return *counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    id = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    /// Maximum root-to-leaf edge count.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Impurity decrease per feature, each split weighted by the fraction of
    /// the root's samples reaching it. Not normalized.
    pub fn raw_importances(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        let total = self.nodes[0].n_samples() as f64;
        for node in &self.nodes {
            if let Node::Split {
                feature,
                left,
                right,
                ..
            } = node
            {
                let gain = impurity_decrease(
                    self.criterion,
                    self.nodes[*left].counts(),
                    self.nodes[*right].counts(),
                );
                imp[*feature] += node.n_samples() as f64 / total * gain;
            }
        }
        imp
    }

    /// Importances normalized to sum 1; all zeros for a single-leaf tree.
    pub fn feature_importances(&self) -> Vec<f64> {
        normalize(self.raw_importances())
    }
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

impl Classifier for DecisionTreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    /// Positive-class fraction of the reached leaf.
    fn score(&self, x: &[f64]) -> f64 {
        let c = self.leaf_for(x);
        c[1] as f64 / (c[0] + c[1]) as f64
    }

    fn predict(&self, x: &[f64]) -> u8 {
        u8::from(self.score(x) >= 0.5)
    }
}

// Nested on-disk form: {feature, threshold, counts, left, right} / {counts}.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum NestedNode {
    Split {
        feature: usize,
        feature_name: String,
        threshold: f64,
        counts: [usize; 2],
        left: Box<NestedNode>,
        right: Box<NestedNode>,
    },
    Leaf {
        counts: [usize; 2],
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TreeFile {
    n_features: usize,
    criterion: Criterion,
    feature_names: Vec<String>,
    root: NestedNode,
}

impl From<DecisionTreeModel> for TreeFile {
    fn from(m: DecisionTreeModel) -> Self {
        fn nest(m: &DecisionTreeModel, id: usize) -> NestedNode {
            match &m.nodes[id] {
                Node::Leaf { counts } => NestedNode::Leaf { counts: *counts },
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    counts,
                } => NestedNode::Split {
                    feature: *feature,
                    feature_name: m.feature_names[*feature].clone(),
                    threshold: *threshold,
                    counts: *counts,
                    left: Box::new(nest(m, *left)),
                    right: Box::new(nest(m, *right)),
                },
            }
        }
        TreeFile {
            root: nest(&m, 0),
            n_features: m.n_features,
            criterion: m.criterion,
            feature_names: m.feature_names,
        }
    }
}

impl TryFrom<TreeFile> for DecisionTreeModel {
    type Error = Error;

    fn try_from(f: TreeFile) -> Result<Self> {
        fn flatten(n: NestedNode, nodes: &mut Vec<Node>, width: usize) -> Result<usize> {
            let id = nodes.len();
            match n {
                NestedNode::Leaf { counts } => {
                    if counts[0] + counts[1] == 0 {
                        return Err(Error::InvalidModel("empty leaf".into()));
                    }
                    nodes.push(Node::Leaf { counts });
                }
                NestedNode::Split {
                    feature,
                    threshold,
                    counts,
                    left,
                    right,
                    ..
                } => {
                    if feature >= width {
                        return Err(Error::InvalidModel(format!(
                            "feature {feature} ≥ width {width}"
                        )));
                    }
                    nodes.push(Node::Leaf { counts });
                    let l = flatten(*left, nodes, width)?;
                    let r = flatten(*right, nodes, width)?;
                    nodes[id] = Node::Split {
                        feature,
                        threshold,
                        left: l,
                        right: r,
                        counts,
                    };
                }
            }
            Ok(id)
        }
        if f.feature_names.len() != f.n_features {
            return Err(Error::InvalidModel(
                "feature_names length ≠ n_features".into(),
            ));
        }
        let mut nodes = Vec::new();
        flatten(f.root, &mut nodes, f.n_features)?;
        Ok(DecisionTreeModel {
            nodes,
            n_features: f.n_features,
            feature_names: f.feature_names,
            criterion: f.criterion,
        })
    }
}
