mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "tripsense",
    version,
    about = "Trip-level alcohol-influence detection from 1 Hz telematics"
)]
struct Cli {
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus (corpus.csv) and its labels (truth.csv).
    Generate(GenerateArgs),
    /// Parse and clean sensor logs; write trips.csv and cleaning_report.json.
    Ingest(IngestArgs),
    /// Aggregate trips into one feature row each.
    Features(FeaturesArgs),
    /// Run one feature-selection method over a features file.
    Select(SelectArgs),
    /// Fit a model on a features file.
    Train(TrainArgs),
    /// Score a model on a features file.
    Evaluate(EvaluateArgs),
    /// Full pipeline from sensor logs to report.
    Run(RunArgs),
    /// Render a decision-tree model as Graphviz DOT.
    ExportTree(ExportTreeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SeedArg {
    /// Top-level seed; every stage derives its own seed from it.
    #[arg(long, env = "TRIPSENSE_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArg,
    #[arg(long, default_value_t = 108)]
    pub trips: usize,
    #[arg(long, default_value_t = 14)]
    pub positive: usize,
    #[arg(long, default_value_t = 21)]
    pub drivers: usize,
    #[arg(long, default_value_t = 16)]
    pub public: usize,
    #[arg(long, default_value_t = 300)]
    pub min_points: usize,
    #[arg(long, default_value_t = 3000)]
    pub max_points: usize,
    /// Impairment signature strength; 0 makes labels carry no signal.
    #[arg(long, default_value_t = 1.0)]
    pub strength: f64,
    #[arg(long, default_value_t = 4)]
    pub weeks: usize,
    #[arg(long, default_value_t = 60, allow_negative_numbers = true)]
    pub utc_offset: i32,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct AggregateArgs {
    /// Local time offset for hour/day features, in minutes (default WAT).
    #[arg(long, default_value_t = 60, allow_negative_numbers = true)]
    pub utc_offset: i32,
    /// Use the population (n) standard deviation instead of the sample one.
    #[arg(long)]
    pub population_std: bool,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub aggregate: AggregateArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodArg {
    None,
    Kbest,
    Percentile,
    Pca,
    Rf,
    Rfecv,
}

#[derive(Args, Debug, Clone)]
pub struct SelectionArgs {
    #[arg(long = "select", value_enum, default_value_t = MethodArg::Kbest)]
    pub method: MethodArg,
    /// Features kept by kbest, pca and rf.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 23.4)]
    pub percentile: f64,
    #[arg(long, default_value_t = 5)]
    pub components: usize,
    /// Rank PCA loadings on the raw covariance instead of correlations.
    #[arg(long)]
    pub pca_raw: bool,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
}

#[derive(Args, Debug)]
pub struct SelectArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelArg {
    Tree,
    Forest,
    Logreg,
    Svm,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionArg {
    Gini,
    Entropy,
}

#[derive(Args, Debug, Clone)]
pub struct TreeArgs {
    #[arg(long, default_value_t = 5)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 10)]
    pub min_samples_split: usize,
    #[arg(long, default_value_t = 5)]
    pub min_samples_leaf: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Gini)]
    pub criterion: CriterionArg,
}

#[derive(Args, Debug, Clone)]
pub struct ForestArgs {
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Features tried per split (default ⌊√width⌋).
    #[arg(long)]
    pub features_per_split: Option<usize>,
    #[arg(long)]
    pub no_bootstrap: bool,
}

#[derive(Args, Debug, Clone)]
pub struct LinearArgs {
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0.0)]
    pub l2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    /// RBF width (default 1/width).
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Skip feature standardization for logreg and svm.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SmoteArgs {
    #[arg(long)]
    pub no_smote: bool,
    #[arg(long, default_value_t = 5)]
    pub smote_k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub smote_ratio: f64,
    /// Search SMOTE neighbours on standardized features.
    #[arg(long)]
    pub smote_standardize: bool,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::Tree)]
    pub model: ModelArg,
    #[command(flatten)]
    pub tree: TreeArgs,
    #[command(flatten)]
    pub forest: ForestArgs,
    #[command(flatten)]
    pub linear: LinearArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// selection.json from `select`; all columns when omitted.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the tree as DOT (tree models only).
    #[arg(long)]
    pub dot: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub smote: SmoteArgs,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub roc: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub aggregate: AggregateArgs,
    #[command(flatten)]
    pub selection: SelectionArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub smote: SmoteArgs,
    /// Select and oversample the whole dataset before splitting.
    #[arg(long)]
    pub paper_order: bool,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Args, Debug)]
pub struct ExportTreeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error [cli]: {e}");
            return ExitCode::from(4);
        }
    }
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Ingest(a) => commands::ingest(a),
        Command::Features(a) => commands::features(a),
        Command::Select(a) => commands::select(a),
        Command::Train(a) => commands::train(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Run(a) => commands::run(a),
        Command::ExportTree(a) => commands::export_tree(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error [{}]: {:#}", e.stage, e.source);
            ExitCode::from(e.code)
        }
    }
}
