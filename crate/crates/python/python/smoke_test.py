"""Smoke test for the tripsense extension module.

Build and install first, e.g. `maturin build --release -m crates/python/Cargo.toml`
followed by `pip install target/wheels/tripsense-*.whl`.
"""

import json
import math
import tempfile
from pathlib import Path

import tripsense as ts


def main() -> None:
    names = ts.canonical_feature_names()
    assert len(names) == ts.N_FEATURES == 47
    assert names[-3:] == ["hour_of_day_mean", "day_of_week_mean", "driver_type"]

    assert ts.encode_influence("Alcohol") == 1
    assert ts.encode_influence("fatigue") == 0
    assert ts.encode_influence("") is None
    assert ts.decompose_timestamp(1_704_067_200) == (1.0, 0)  # Monday 01:00 WAT

    assert ts.gini(2, 2) == 0.5
    m = ts.classification_metrics(3, 2, 0, 17)
    assert abs(m["precision"] - 0.6) < 1e-12 and abs(m["f1"] - 0.75) < 1e-12
    points, auc = ts.roc_curve([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8])
    assert auc == 0.75 and points[0] == (0.0, 0.0) and points[-1] == (1.0, 1.0)
    assert abs(ts.f_classif([[1.0], [2.0], [3.0], [4.0]], [0, 0, 1, 1])[0] - 8.0) < 1e-9

    x = [[float(i), float(i % 5)] for i in range(108)]
    y = [1 if i % 8 == 0 else 0 for i in range(108)]
    train, test = ts.stratified_split(x, y, 0.2, 42)
    assert len(test) == 22 and sum(y[i] for i in test) == 3
    assert sorted(train + test) == list(range(108))

    xs, ys = ts.smote(x, y)
    assert len(xs) == 188 and sum(ys) == 94

    tree = ts.DecisionTree.fit([[1.0], [2.0], [3.0], [4.0]], [0, 0, 1, 1],
                               max_depth=1, min_samples_split=2, min_samples_leaf=1)
    assert tree.predict([[0.0], [5.0]]) == [0, 1]
    assert tree.to_dot().startswith("digraph")
    again = ts.DecisionTree.from_json(tree.to_json())
    assert again.to_json() == tree.to_json()

    with tempfile.TemporaryDirectory() as tmp:
        truth = ts.generate_corpus(tmp, trips=30, positive=8, seed=3)
        assert len(truth) == 30 and sum(truth.values()) == 8
        report = json.loads(ts.run_pipeline([str(Path(tmp) / "corpus.csv")]))
        assert report["model"] == "decision_tree"
        assert 0.0 <= report["auc"] <= 1.0 and not math.isnan(report["recall"])

    try:
        ts.roc_curve([1, 1], [0.2, 0.3])
    except ts.TripsenseError:
        pass
    else:
        raise AssertionError("single-class ROC should raise")

    print(f"tripsense smoke test ok: {tree!r}, pipeline auc={report['auc']:.3f}")


if __name__ == "__main__":
    main()
