use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_ann::{AttrMetric, FeatureMetric, FusionParams, GraphParams, Strategy};

mod commands;
mod data;

#[derive(Parser, Debug)]
#[command(
    name = "hybrid-ann",
    version,
    about = "Hybrid vector search with exact attribute constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset directory.
    Gen(GenArgs),
    /// Build a graph index over a dataset directory.
    Build(BuildArgs),
    /// Compute exact filtered ground truth for the queries.
    Gt(GtArgs),
    /// Answer the queries and print ids with fused distances.
    Search(SearchArgs),
    /// Measure recall and latency of one strategy over a list of budgets.
    Bench(BenchArgs),
    /// Re-run strategies while the attribute cardinality grows.
    Robustness(RobustnessArgs),
    /// Fusion recall across scale factors w.
    Sensitivity(SensitivityArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricArg {
    Ip,
    L2,
}

impl From<MetricArg> for FeatureMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Ip => FeatureMetric::IP,
            MetricArg::L2 => FeatureMetric::L2,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttrMetricArg {
    Manhattan,
    Hamming,
}

impl From<AttrMetricArg> for AttrMetric {
    fn from(m: AttrMetricArg) -> Self {
        match m {
            AttrMetricArg::Manhattan => AttrMetric::ManhattanLog,
            AttrMetricArg::Hamming => AttrMetric::Hamming,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    /// Composite graph under the fused distance.
    Fused,
    /// Feature-only graph for post-filtering.
    Feature,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 1_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub queries: u64,
    /// Feature dimension m.
    #[arg(long, default_value_t = 32, value_parser = clap::value_parser!(u64).range(1..))]
    pub dim: u64,
    /// Values per attribute dimension C.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub categories: u32,
    /// Attribute dimensions n.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub attr_dims: u64,
    #[arg(long, value_enum, default_value_t = MetricArg::Ip)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Overwrite existing output.
    #[arg(long)]
    pub force: bool,
}

/// Dataset directory as written by `gen`.
#[derive(Args, Debug)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Feature metric; defaults to the one recorded in the directory manifest.
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    /// Query features; defaults to query.fvecs in the data directory.
    #[arg(long)]
    pub query_features: Option<PathBuf>,
    /// Query attributes; defaults to query_attrs.ivecs in the data directory.
    #[arg(long)]
    pub query_attrs: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct FusionArgs {
    #[arg(long, default_value_t = FusionParams::DEFAULT_W)]
    pub w: f64,
    #[arg(long, default_value_t = FusionParams::DEFAULT_BIAS)]
    pub bias: f64,
    #[arg(long, default_value_t = FusionParams::DEFAULT_G_MAX)]
    pub g_max: f64,
    #[arg(long, value_enum, default_value_t = AttrMetricArg::Manhattan)]
    pub attr_metric: AttrMetricArg,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct GraphArgs {
    /// Links per node above level 0 (2M at level 0).
    #[arg(short = 'M', long = "max-links", default_value_t = GraphParams::DEFAULT_M)]
    pub m: usize,
    #[arg(long, default_value_t = GraphParams::DEFAULT_EF_CONSTRUCTION)]
    pub ef_construction: usize,
    #[arg(long, default_value_t = GraphParams::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Index file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = GraphKind::Fused)]
    pub graph: GraphKind,
    #[command(flatten)]
    pub fusion: FusionArgs,
    #[command(flatten)]
    pub params: GraphArgs,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct GtArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    #[arg(short, long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Ground-truth ivecs file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    /// Index file; required by fusion (fused graph) and post-filter (feature graph).
    #[arg(long)]
    pub index: Option<PathBuf>,
    #[arg(long, default_value = "fusion")]
    pub strategy: Strategy,
    #[arg(short, long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long, default_value_t = 80)]
    pub ef: usize,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub queries: QueryArgs,
    /// Prebuilt index; built from the graph flags when absent.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Ground-truth ivecs; computed when absent.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, default_value = "fusion")]
    pub strategy: Strategy,
    /// ef_search values.
    #[arg(long, value_delimiter = ',', default_value = "80")]
    pub ef: Vec<usize>,
    #[arg(short, long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    /// Query worker threads; defaults to the available cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[command(flatten)]
    pub fusion: FusionArgs,
    #[command(flatten)]
    pub params: GraphArgs,
    /// CSV file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct SuiteArgs {
    /// Dataset directory; only its features are used.
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_delimiter = ',', default_value = "80")]
    pub ef: Vec<usize>,
    #[arg(short, long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Attribute dimensions n.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub attr_dims: u64,
    /// Seed of the attribute draws.
    #[arg(long, default_value_t = 42)]
    pub attr_seed: u64,
    #[command(flatten)]
    pub fusion: FusionArgs,
    #[command(flatten)]
    pub params: GraphArgs,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
}

#[derive(Args, Debug)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Attribute cardinalities C.
    #[arg(
        long = "categories",
        value_delimiter = ',',
        default_value = "10,100,500,1000"
    )]
    pub categories: Vec<u32>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "fusion,post-filter,pre-filter"
    )]
    pub strategies: Vec<Strategy>,
}

#[derive(Args, Debug)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u32).range(1..))]
    pub categories: u32,
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,0.25,0.1")]
    pub w_list: Vec<f64>,
    /// Derive bias per w as w * g_max + 1/log10(2) + margin instead of using --bias.
    #[arg(long)]
    pub bias_margin: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Build(a) => commands::build(&a),
        Command::Gt(a) => commands::gt(&a),
        Command::Search(a) => commands::search(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Robustness(a) => commands::robustness(&a),
        Command::Sensitivity(a) => commands::sensitivity(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hybrid-ann: {}", e.message().replace('\n', " "));
            ExitCode::from(e.code())
        }
    }
}
