use tripsense::learners::{LogRegParams, RandomForestParams, SvmParams};
use tripsense::pipeline::{run_pipeline, ModelSpec, PipelineConfig, SelectionSpec};
use tripsense::synthgen::{generate_corpus, GenConfig};

fn corpus(strength: f64) -> Vec<tripsense::RawRecord> {
    generate_corpus(&GenConfig {
        signature_strength: strength,
        ..Default::default()
    })
    .unwrap()
    .0
}

#[test]
fn default_pipeline_on_signal_corpus() {
    let out = run_pipeline(corpus(1.0), &PipelineConfig::default()).unwrap();
    assert_eq!(out.cleaning.trips_kept, 108);
    assert_eq!(out.test_rows, 22);
    // 86 training rows (11 positive) oversampled to 75/75.
    assert_eq!(out.train_rows, 150);
    assert_eq!(out.model.feature_names.len(), 10);
    assert_eq!(out.report.confusion.tp + out.report.confusion.fn_, 3);
    assert!(out.report.recall >= 0.9, "{:?}", out.report);
    assert!(out.report.auc >= 0.85, "{:?}", out.report);
}

#[test]
fn null_corpus_is_near_chance() {
    let out = run_pipeline(corpus(0.0), &PipelineConfig::default()).unwrap();
    assert!((0.3..=0.7).contains(&out.report.auc), "{:?}", out.report);
}

#[test]
fn paper_order_leaks_synthetic_rows_into_test() {
    let cfg = PipelineConfig {
        paper_order: true,
        ..Default::default()
    };
    let out = run_pipeline(corpus(1.0), &cfg).unwrap();
    // SMOTE first: 188 rows, of which 20 % per class go to test.
    assert_eq!(out.train_rows + out.test_rows, 188);
    assert_eq!(out.test_rows, 38);
}

#[test]
fn every_model_separates_the_signal_corpus() {
    let records = corpus(1.0);
    let models = [
        ModelSpec::RandomForest(RandomForestParams::default()),
        ModelSpec::LogisticRegression(LogRegParams::default()),
        ModelSpec::SvmRbf(SvmParams::default()),
    ];
    for m in models {
        let cfg = PipelineConfig {
            model: m,
            ..Default::default()
        };
        let out = run_pipeline(records.clone(), &cfg).unwrap();
        assert!(
            out.report.auc >= 0.85,
            "{}: {:?}",
            out.report.model,
            out.report
        );
    }
}

#[test]
fn every_selection_method_runs() {
    let records = corpus(1.0);
    let sels = [
        (SelectionSpec::None, Some(47)),
        (SelectionSpec::Percentile { percentile: 23.4 }, Some(11)),
        (SelectionSpec::PcaLoading(Default::default()), Some(10)),
        (
            SelectionSpec::RfImportance {
                k: 10,
                forest: RandomForestParams::default(),
            },
            Some(10),
        ),
        (SelectionSpec::Rfecv(Default::default()), None),
    ];
    for (s, width) in sels {
        let cfg = PipelineConfig {
            selection: s,
            ..Default::default()
        };
        let out = run_pipeline(records.clone(), &cfg).unwrap();
        let n = out.model.feature_names.len();
        if let Some(w) = width {
            assert_eq!(n, w, "{s:?}");
        }
        assert!((1..=47).contains(&n));
        assert_eq!(out.selection.is_some(), !matches!(s, SelectionSpec::None));
    }
}
