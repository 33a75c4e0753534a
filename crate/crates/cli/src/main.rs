mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mvdam", version, about = "Multi-view ideology classifier for news articles")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Training configuration file (`key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Size profile the configuration starts from.
    #[arg(long, global = true, value_enum)]
    pub profile: Option<ProfileArg>,
    /// Comma-separated subset of title,network,content.
    #[arg(long, global = true)]
    pub views: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum ProfileArg {
    Desk,
    Paper,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic labeled corpus with planted signal.
    Synth(SynthArgs),
    /// Read a JSONL corpus, strip boilerplate and write the cleaned corpus.
    Ingest(IngestArgs),
    /// Train node embeddings on the source hyperlink graph.
    EmbedGraph(EmbedGraphArgs),
    /// Split a corpus, train a model and save the checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled corpus.
    Eval(EvalArgs),
    /// Write class distributions for every article.
    Predict(PredictArgs),
    /// Fit isotonic calibration on one prediction file and apply it to another.
    Calibrate(CalibrateArgs),
    /// Rank sources by mean calibrated class score.
    RankSources(RankArgs),
    /// Write word and sentence attention weights.
    ExportAttention(PredictArgs),
    /// Train every baseline and model flavor on shared splits.
    Ladder(LadderArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 4000)]
    pub articles: usize,
    #[arg(long, default_value_t = 10)]
    pub sources_per_block: usize,
    #[arg(long)]
    pub title_signal: Option<f64>,
    #[arg(long)]
    pub content_signal: Option<f64>,
    #[arg(long)]
    pub link_signal: Option<f64>,
    /// Leave out per-source footers and franchise links.
    #[arg(long)]
    pub no_boilerplate: bool,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Records carry `title` and `body` text instead of token lists.
    #[arg(long)]
    pub raw: bool,
    /// Skip boilerplate removal.
    #[arg(long)]
    pub no_clean: bool,
}

#[derive(Args, Debug)]
pub struct EmbedGraphArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Embedding table; node names go to `<out>.nodes`.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the weighted edge list as TSV.
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint path; sidecars go next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Named model flavor, e.g. MVDAM, CNN, FNN, HDAM, MVDAM(T+N).
    #[arg(long)]
    pub preset: Option<String>,
    /// Train/validation/test fractions.
    #[arg(long, default_value = "0.75,0.125,0.125")]
    pub split: String,
    /// Precomputed node embeddings from `embed-graph`.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Per-epoch log as CSV.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory to receive train.jsonl, val.jsonl and test.jsonl.
    #[arg(long)]
    pub splits_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Per-class metrics CSV.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    #[arg(long)]
    pub predictions: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// Labeled predictions to fit on, normally the validation split.
    #[arg(long)]
    pub fit: PathBuf,
    /// Predictions to calibrate.
    #[arg(long)]
    pub apply: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Reliability bins of the calibrated predictions.
    #[arg(long)]
    pub reliability: Option<PathBuf>,
    /// Reliability bins of the raw predictions.
    #[arg(long)]
    pub reliability_raw: Option<PathBuf>,
    /// Fitted isotonic models as JSON.
    #[arg(long)]
    pub calibrator: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    /// Calibrated predictions.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, default_value = "left")]
    pub ideology: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LadderArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = "1,2,3,4,5")]
    pub seeds: String,
    /// Comma-separated subset of the ladder, e.g. chance,lr,mvdam.
    #[arg(long)]
    pub entries: Option<String>,
    #[arg(long, default_value = "0.75,0.125,0.125")]
    pub split: String,
    /// Receives ladder.csv, ladder.txt and manifest.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err))
        }
    }
}
