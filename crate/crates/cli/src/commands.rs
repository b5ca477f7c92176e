use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use tripsense::aggregate::{
    build_dataset, read_features_csv, write_features_csv, AggregateOptions, StdKind,
};
use tripsense::dot::export_tree_dot;
use tripsense::eval::{trapezoid_area, write_roc_csv, EvalReport};
use tripsense::featselect::{PcaParams, RfecvParams, SelectionResult};
use tripsense::ingest::{
    clean_and_group, parse_sensor_csv, write_sensor_csv, write_trips_csv, CleaningReport, UtcOffset,
};
use tripsense::learners::{
    Criterion, LogRegParams, Model, RandomForestParams, SvmParams, TreeParams,
};
use tripsense::pipeline::{run_pipeline, ModelFile, ModelSpec, PipelineConfig, SelectionSpec};
use tripsense::resample::{smote, SmoteParams};
use tripsense::rng::mix;
use tripsense::synthgen::{generate_corpus, write_truth_csv, GenConfig};
use tripsense::{Error, LabeledDataset, RawRecord};

use crate::{
    AggregateArgs, CriterionArg, EvaluateArgs, ExportTreeArgs, FeaturesArgs, ForestArgs,
    GenerateArgs, IngestArgs, MethodArg, ModelArg, ModelArgs, RunArgs, SelectArgs, SelectionArgs,
    SmoteArgs, TrainArgs, TreeArgs,
};

/// A failure attributed to the module that raised it, with its exit code.
pub struct Failure {
    pub stage: &'static str,
    pub source: anyhow::Error,
    pub code: u8,
}

pub type Outcome<T = ()> = std::result::Result<T, Failure>;

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

fn code_for(e: &Error) -> u8 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        Error::InvalidModel(_) | Error::DegenerateMatrix(_) => EXIT_INVARIANT,
        _ => EXIT_DATA,
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Outcome<T>;
}

impl<T> Stage<T> for tripsense::Result<T> {
    fn stage(self, stage: &'static str) -> Outcome<T> {
        self.map_err(|e| Failure {
            stage,
            code: code_for(&e),
            source: e.into(),
        })
    }
}

impl<T> Stage<T> for std::io::Result<T> {
    fn stage(self, stage: &'static str) -> Outcome<T> {
        self.map_err(|e| Failure {
            stage,
            code: EXIT_DATA,
            source: e.into(),
        })
    }
}

fn invariant(stage: &'static str, msg: String) -> Failure {
    Failure {
        stage,
        source: anyhow::anyhow!(msg),
        code: EXIT_INVARIANT,
    }
}

fn with_path<T>(r: Outcome<T>, path: &Path) -> Outcome<T> {
    r.map_err(|mut f| {
        f.source = f.source.context(path.display().to_string());
        f
    })
}

fn open(path: &Path, stage: &'static str) -> Outcome<BufReader<File>> {
    with_path(File::open(path).stage(stage), path).map(BufReader::new)
}

fn create(path: &Path, stage: &'static str) -> Outcome<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        with_path(fs::create_dir_all(parent).stage(stage), parent)?;
    }
    with_path(File::create(path).stage(stage), path).map(BufWriter::new)
}

fn write_json<T: Serialize>(path: &Path, value: &T, stage: &'static str) -> Outcome {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(Error::from)
        .stage(stage)?;
    text.push('\n');
    with_path(fs::write(path, text).stage(stage), path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, stage: &'static str) -> Outcome<T> {
    let r = open(path, stage)?;
    with_path(
        serde_json::from_reader(r).map_err(Error::from).stage(stage),
        path,
    )
}

fn read_sensor_logs(paths: &[PathBuf]) -> Outcome<Vec<RawRecord>> {
    let mut all = Vec::new();
    for p in paths {
        let r = open(p, "ingest")?;
        all.extend(with_path(parse_sensor_csv(r).stage("ingest"), p)?);
    }
    Ok(all)
}

fn read_features(path: &Path) -> Outcome<LabeledDataset> {
    let r = open(path, "aggregate")?;
    with_path(read_features_csv(r).stage("aggregate"), path)
}

fn sha256_file(path: &Path) -> Outcome<String> {
    let bytes = with_path(fs::read(path).stage("cli"), path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Seeds handed to each stochastic stage, all derived from one root.
/// The split uses the root itself; the rest get decorrelated streams.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StageSeeds {
    pub root: u64,
    pub split: u64,
    pub selection: u64,
    pub smote: u64,
    pub model: u64,
}

impl StageSeeds {
    pub fn from_root(root: u64) -> Self {
        Self {
            root,
            split: root,
            selection: mix(root, 1),
            smote: mix(root, 2),
            model: mix(root, 3),
        }
    }
}

fn aggregate_options(a: &AggregateArgs) -> Outcome<AggregateOptions> {
    Ok(AggregateOptions {
        utc_offset: UtcOffset::from_minutes(a.utc_offset).stage("cli")?,
        std_kind: if a.population_std {
            StdKind::Population
        } else {
            StdKind::Sample
        },
    })
}

fn tree_params(a: &TreeArgs, seed: u64) -> TreeParams {
    TreeParams {
        max_depth: a.max_depth,
        min_samples_split: a.min_samples_split,
        min_samples_leaf: a.min_samples_leaf,
        seed,
        criterion: match a.criterion {
            CriterionArg::Gini => Criterion::Gini,
            CriterionArg::Entropy => Criterion::Entropy,
        },
    }
}

fn forest_params(f: &ForestArgs, t: &TreeArgs, seed: u64) -> RandomForestParams {
    RandomForestParams {
        n_trees: f.trees,
        tree: tree_params(t, seed),
        features_per_split: f.features_per_split,
        bootstrap: !f.no_bootstrap,
        seed,
    }
}

fn selection_spec(s: &SelectionArgs, t: &TreeArgs, f: &ForestArgs, seed: u64) -> SelectionSpec {
    match s.method {
        MethodArg::None => SelectionSpec::None,
        MethodArg::Kbest => SelectionSpec::KBest { k: s.k },
        MethodArg::Percentile => SelectionSpec::Percentile {
            percentile: s.percentile,
        },
        MethodArg::Pca => SelectionSpec::PcaLoading(PcaParams {
            n_components: s.components,
            k: s.k,
            standardize: !s.pca_raw,
        }),
        MethodArg::Rf => SelectionSpec::RfImportance {
            k: s.k,
            forest: forest_params(f, t, seed),
        },
        MethodArg::Rfecv => SelectionSpec::Rfecv(RfecvParams {
            tree: tree_params(t, seed),
            n_folds: s.folds,
            seed,
        }),
    }
}

fn model_spec(m: &ModelArgs, seed: u64) -> ModelSpec {
    let l = &m.linear;
    match m.model {
        ModelArg::Tree => ModelSpec::DecisionTree(tree_params(&m.tree, seed)),
        ModelArg::Forest => ModelSpec::RandomForest(forest_params(&m.forest, &m.tree, seed)),
        ModelArg::Logreg => ModelSpec::LogisticRegression(LogRegParams {
            learning_rate: l.learning_rate,
            max_iters: l.max_iters,
            l2: l.l2,
            tolerance: l.tolerance,
            standardize: !l.no_standardize,
        }),
        ModelArg::Svm => ModelSpec::SvmRbf(SvmParams {
            gamma: l.gamma,
            lambda: l.lambda,
            epochs: l.epochs,
            seed,
            standardize: !l.no_standardize,
        }),
    }
}

fn smote_params(s: &SmoteArgs, seed: u64) -> Option<SmoteParams> {
    (!s.no_smote).then_some(SmoteParams {
        k_neighbors: s.smote_k,
        seed,
        target_ratio: s.smote_ratio,
        standardize: s.smote_standardize,
    })
}

fn selection_json(sel: Option<&SelectionResult>, names: &[String]) -> serde_json::Value {
    match sel {
        Some(s) => s.to_json(names),
        None => serde_json::json!({ "method": "none", "selected": names, "scores": null }),
    }
}

fn write_dot_if_tree(model: &Model, path: &Path, stage: &'static str) -> Outcome<bool> {
    if let Model::DecisionTree(t) = model {
        with_path(fs::write(path, export_tree_dot(t)).stage(stage), path)?;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// Cross-checks a finished report before it is written.
fn check_report(report: &EvalReport, test_rows: usize) -> Outcome {
    if report.confusion.total() != test_rows {
        return Err(invariant(
            "eval",
            format!(
                "confusion matrix covers {} rows, test set has {test_rows}",
                report.confusion.total()
            ),
        ));
    }
    let area = trapezoid_area(&report.roc);
    if (area - report.auc).abs() > 1e-9 {
        return Err(invariant(
            "eval",
            format!("AUC {} disagrees with ROC area {area}", report.auc),
        ));
    }
    Ok(())
}

fn print_report(r: &EvalReport) {
    let c = &r.confusion;
    println!(
        "{}: tp={} fp={} fn={} tn={} accuracy={:.4} precision={:.4} recall={:.4} f1={:.4} auc={:.4}",
        r.model, c.tp, c.fp, c.fn_, c.tn, r.accuracy, r.precision, r.recall, r.f1, r.auc
    );
}

pub fn generate(a: GenerateArgs) -> Outcome {
    let cfg = GenConfig {
        n_drivers: a.drivers,
        n_public: a.public,
        n_trips: a.trips,
        n_positive: a.positive,
        points_min: a.min_points,
        points_max: a.max_points,
        seed: a.seed.seed,
        signature_strength: a.strength,
        weeks: a.weeks,
        utc_offset: UtcOffset::from_minutes(a.utc_offset).stage("synthgen")?,
    };
    let (records, truth) = generate_corpus(&cfg).stage("synthgen")?;
    with_path(fs::create_dir_all(&a.out).stage("synthgen"), &a.out)?;
    let corpus = a.out.join("corpus.csv");
    let mut w = create(&corpus, "synthgen")?;
    with_path(
        write_sensor_csv(&mut w, &records).stage("synthgen"),
        &corpus,
    )?;
    w.flush().stage("synthgen")?;
    let truth_path = a.out.join("truth.csv");
    let mut w = create(&truth_path, "synthgen")?;
    with_path(
        write_truth_csv(&mut w, &truth).stage("synthgen"),
        &truth_path,
    )?;
    w.flush().stage("synthgen")?;
    let positives = truth.values().filter(|&&l| l == 1).count();
    println!(
        "generated {} trips ({positives} alcohol-influenced), {} points -> {}",
        truth.len(),
        records.len(),
        a.out.display()
    );
    Ok(())
}

fn print_cleaning(r: &CleaningReport) {
    println!(
        "kept {}/{} trips ({} without report, {} invalid influence), {}/{} points",
        r.trips_kept,
        r.trips_in,
        r.trips_dropped_no_report,
        r.trips_dropped_invalid_influence,
        r.points_kept,
        r.points_in
    );
}

pub fn ingest(a: IngestArgs) -> Outcome {
    let records = read_sensor_logs(&a.input)?;
    let (trips, report) = clean_and_group(records).stage("ingest")?;
    with_path(fs::create_dir_all(&a.out).stage("ingest"), &a.out)?;
    let path = a.out.join("trips.csv");
    let mut w = create(&path, "ingest")?;
    with_path(write_trips_csv(&mut w, &trips).stage("ingest"), &path)?;
    w.flush().stage("ingest")?;
    write_json(&a.out.join("cleaning_report.json"), &report, "ingest")?;
    print_cleaning(&report);
    Ok(())
}

pub fn features(a: FeaturesArgs) -> Outcome {
    let opts = aggregate_options(&a.aggregate)?;
    let records = read_sensor_logs(&a.input)?;
    let (trips, report) = clean_and_group(records).stage("ingest")?;
    let ds = build_dataset(&trips, &opts).stage("aggregate")?;
    let mut w = create(&a.out, "aggregate")?;
    with_path(write_features_csv(&mut w, &ds).stage("aggregate"), &a.out)?;
    w.flush().stage("aggregate")?;
    print_cleaning(&report);
    let (neg, pos) = ds.class_counts();
    println!(
        "{} feature rows ({pos} positive, {neg} negative) -> {}",
        ds.n_rows(),
        a.out.display()
    );
    Ok(())
}

pub fn select(a: SelectArgs) -> Outcome {
    let seeds = StageSeeds::from_root(a.seed.seed);
    let ds = read_features(&a.features)?;
    let spec = selection_spec(&a.selection, &a.tree, &a.forest, seeds.selection);
    let sel = spec.apply(&ds).stage("featselect")?;
    let json = selection_json(sel.as_ref(), ds.feature_names());
    write_json(&a.out, &json, "featselect")?;
    println!("selected: {}", json["selected"]);
    Ok(())
}

pub fn train(a: TrainArgs) -> Outcome {
    let seeds = StageSeeds::from_root(a.seed.seed);
    let ds = read_features(&a.features)?;
    let ds = match &a.selection {
        Some(p) => {
            let v: serde_json::Value = read_json(p, "featselect")?;
            let names = SelectionResult::selected_names_from_json(&v).stage("featselect")?;
            ds.select_named(&names).stage("featselect")?
        }
        None => ds,
    };
    let ds = match smote_params(&a.smote, seeds.smote) {
        Some(p) => smote(&ds, &p).stage("resample")?,
        None => ds,
    };
    let spec = model_spec(&a.model, seeds.model);
    let model = ModelFile {
        model: spec.fit(&ds).stage("learners")?,
        feature_names: ds.feature_names().to_vec(),
    };
    write_json(&a.out, &model, "learners")?;
    if let Some(dot) = &a.dot {
        if !write_dot_if_tree(&model.model, dot, "learners")? {
            eprintln!("note: --dot ignored for {}", model.model.name());
        }
    }
    println!(
        "trained {} on {} rows x {} features -> {}",
        model.model.name(),
        ds.n_rows(),
        ds.n_features(),
        a.out.display()
    );
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> Outcome {
    let model: ModelFile = read_json(&a.model, "learners")?;
    let ds = read_features(&a.features)?;
    let report = model.evaluate(&ds).stage("eval")?;
    check_report(&report, ds.n_rows())?;
    write_json(&a.out, &report, "eval")?;
    if let Some(roc) = &a.roc {
        let mut w = create(roc, "eval")?;
        with_path(write_roc_csv(&mut w, &report.roc).stage("eval"), roc)?;
        w.flush().stage("eval")?;
    }
    print_report(&report);
    Ok(())
}

pub fn export_tree(a: ExportTreeArgs) -> Outcome {
    let model: ModelFile = read_json(&a.model, "dot")?;
    if !write_dot_if_tree(&model.model, &a.out, "dot")? {
        return Err(Failure {
            stage: "dot",
            source: anyhow::anyhow!(
                "{} is a {}, not a decision tree",
                a.model.display(),
                model.model.name()
            ),
            code: EXIT_USAGE,
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    seeds: StageSeeds,
    config: &'a PipelineConfig,
    inputs: Vec<InputDigest>,
    train_rows: usize,
    test_rows: usize,
    cleaning: &'a CleaningReport,
}

#[derive(Serialize)]
struct RunReport<'a> {
    #[serde(flatten)]
    report: &'a EvalReport,
    provenance: Provenance<'a>,
}

pub fn run(a: RunArgs) -> Outcome {
    let seeds = StageSeeds::from_root(a.seed.seed);
    let cfg = PipelineConfig {
        aggregate: aggregate_options(&a.aggregate)?,
        selection: selection_spec(
            &a.selection,
            &a.model.tree,
            &a.model.forest,
            seeds.selection,
        ),
        smote: smote_params(&a.smote, seeds.smote),
        paper_order: a.paper_order,
        model: model_spec(&a.model, seeds.model),
        test_fraction: a.test_fraction,
        split_seed: seeds.split,
    };
    let inputs = a
        .input
        .iter()
        .map(|p| {
            Ok(InputDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Outcome<Vec<_>>>()?;
    let records = read_sensor_logs(&a.input)?;
    let out = run_pipeline(records, &cfg).stage("pipeline")?;
    check_report(&out.report, out.test_rows)?;

    let dir = &a.out;
    with_path(fs::create_dir_all(dir).stage("cli"), dir)?;
    write_json(&dir.join("cleaning_report.json"), &out.cleaning, "ingest")?;
    let features = dir.join("features.csv");
    let mut w = create(&features, "aggregate")?;
    with_path(
        write_features_csv(&mut w, &out.dataset).stage("aggregate"),
        &features,
    )?;
    w.flush().stage("aggregate")?;
    write_json(
        &dir.join("selection.json"),
        &selection_json(out.selection.as_ref(), out.dataset.feature_names()),
        "featselect",
    )?;
    write_json(&dir.join("model.json"), &out.model, "learners")?;
    let roc = dir.join("roc.csv");
    let mut w = create(&roc, "eval")?;
    with_path(write_roc_csv(&mut w, &out.report.roc).stage("eval"), &roc)?;
    w.flush().stage("eval")?;
    write_dot_if_tree(&out.model.model, &dir.join("tree.dot"), "dot")?;
    let report = RunReport {
        report: &out.report,
        provenance: Provenance {
            tool: "tripsense",
            version: env!("CARGO_PKG_VERSION"),
            seeds,
            config: &cfg,
            inputs,
            train_rows: out.train_rows,
            test_rows: out.test_rows,
            cleaning: &out.cleaning,
        },
    };
    write_json(&dir.join("report.json"), &report, "eval")?;

    print_cleaning(&out.cleaning);
    println!("features: {}", out.model.feature_names.join(", "));
    println!("train rows {}, test rows {}", out.train_rows, out.test_rows);
    print_report(&out.report);
    Ok(())
}
