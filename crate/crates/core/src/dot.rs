//! Graphviz rendering of a fitted tree.

use std::fmt::Write;

use crate::learners::{DecisionTreeModel, Node};

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Renders a `digraph`. Split nodes read `name ≤ threshold\ngini=g\nsamples=n`;
/// leaves show class counts and the predicted class. The left edge is
/// labelled `true`, the right `false`.
pub fn export_tree_dot(model: &DecisionTreeModel) -> String {
    let mut out = String::from("digraph Tree {\n");
    out.push_str("node [shape=box, style=\"rounded\", fontname=\"helvetica\"] ;\n");
    out.push_str("edge [fontname=\"helvetica\"] ;\n");
    let criterion = format!("{:?}", model.criterion()).to_lowercase();
    for (id, node) in model.nodes().iter().enumerate() {
        let counts = node.counts();
        let impurity = model.criterion().impurity(counts);
        match node {
            Node::Split {
                feature, threshold, ..
            } => {
                let name = escape(&model.feature_names()[*feature]);
                writeln!(
                    out,
                    "{id} [label=\"{name} ≤ {threshold:.4}\\n{criterion}={impurity:.3}\\nsamples={}\"] ;",
                    node.n_samples()
                )
                .unwrap();
            }
            Node::Leaf { .. } => {
                let class = u8::from(counts[1] * 2 >= counts[0] + counts[1]);
                writeln!(
                    out,
                    "{id} [label=\"{criterion}={impurity:.3}\\nsamples={}\\nvalue=[{}, {}]\\nclass={class}\"] ;",
                    node.n_samples(),
                    counts[0],
                    counts[1]
                )
                .unwrap();
            }
        }
    }
    for (id, node) in model.nodes().iter().enumerate() {
        if let Node::Split { left, right, .. } = node {
            writeln!(out, "{id} -> {left} [label=\"true\"] ;").unwrap();
            writeln!(out, "{id} -> {right} [label=\"false\"] ;").unwrap();
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{fit_decision_tree, TreeParams};

    fn count(dot: &str, pat: &str) -> usize {
        dot.matches(pat).count()
    }

    fn node_lines(dot: &str) -> usize {
        dot.lines()
            .filter(|l| l.contains("[label=") && !l.contains("->"))
            .count()
    }

    #[test]
    fn single_leaf() {
        let t =
            fit_decision_tree(&[vec![1.0], vec![2.0]], &[1, 1], &TreeParams::default()).unwrap();
        let dot = export_tree_dot(&t);
        assert!(dot.starts_with("digraph"));
        assert_eq!(node_lines(&dot), 1);
        assert_eq!(count(&dot, "->"), 0);
        assert!(dot.contains("class=1"));
    }

    #[test]
    fn stump_structure_and_labels() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let p = TreeParams {
            max_depth: 1,
            min_samples_split: 2,
            min_samples_leaf: 1,
            ..Default::default()
        };
        let t = fit_decision_tree(&x, &[0, 0, 1, 1], &p)
            .unwrap()
            .with_feature_names(&["day_of_week_mean".to_string()])
            .unwrap();
        let dot = export_tree_dot(&t);
        assert_eq!(node_lines(&dot), 3);
        assert_eq!(count(&dot, "->"), 2);
        assert!(dot.contains("day_of_week_mean ≤ 2.5000\\ngini=0.500\\nsamples=4"));
        assert!(dot.contains("0 -> 1 [label=\"true\"]"));
        assert!(dot.contains("0 -> 2 [label=\"false\"]"));
        assert_eq!(count(&dot, "{"), count(&dot, "}"));
    }
}
