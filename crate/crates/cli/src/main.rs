//! `raman`: synthesize, preprocess, evaluate and explain two-sample Raman
//! spectra classification.

mod commands;
mod output;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "raman", version, about = "Two-sample Raman spectra classification")]
struct Cli {
    /// More log output on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic two-sample data set from a preset.
    Synth(SynthArgs),
    /// Run the outlier gate and smoothing, writing the cleaned spectra.
    Preprocess(PreprocessArgs),
    /// Cross-validated ROC-AUC of each method in each region.
    Evaluate(EvaluateArgs),
    /// Permutation importance (LRP) and saliency maps (CNN) on a held-out split.
    Explain(ExplainArgs),
}

/// Options every subcommand accepts. Any long option may also be given in
/// the `--config` file as `name = value`; flags win.
#[derive(Args, Debug)]
pub struct Common {
    /// `key = value` file with defaults for any long option.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, value_name = "DIR")]
    pub out: Option<String>,
    /// Master seed for every random stream [default: 0].
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Args, Debug)]
pub struct Inputs {
    /// Spectra CSV of the first sample (label 1).
    #[arg(long, value_name = "CSV")]
    pub input_a: Option<String>,
    /// Spectra CSV of the second sample (label 0).
    #[arg(long, value_name = "CSV")]
    pub input_b: Option<String>,
}

#[derive(Args, Debug)]
pub struct PreprocessOpts {
    /// Savitzky-Golay window (odd) or `off` [default: 91].
    #[arg(long, value_name = "N|off")]
    pub sg_window: Option<String>,
    /// Savitzky-Golay polynomial order [default: 3].
    #[arg(long, value_name = "N")]
    pub sg_order: Option<String>,
    /// Edge handling: mirror or fit [default: mirror].
    #[arg(long)]
    pub sg_edge: Option<String>,
    /// Outlier band half-width in standard deviations, or `off` [default: 3].
    #[arg(long, value_name = "K|off")]
    pub outlier_k: Option<String>,
    /// Outlier band estimated per_label or pooled [default: per_label].
    #[arg(long)]
    pub surface: Option<String>,
}

#[derive(Args, Debug)]
pub struct ModelOpts {
    /// LRP sub-band cuts in cm^-1, comma separated, or `auto` [default: auto].
    #[arg(long, value_name = "LIST|auto")]
    pub pool_cuts: Option<String>,
    /// Principal components kept by PCA [default: 5].
    #[arg(long, value_name = "M")]
    pub pca_components: Option<String>,
    /// Folds of the inner threshold search [default: 10].
    #[arg(long, value_name = "K")]
    pub inner_folds: Option<String>,
    /// Ridge shrinkage of the logistic models [default: 1].
    #[arg(long)]
    pub shrinkage: Option<String>,
    /// CNN epoch budget [default: 100].
    #[arg(long)]
    pub epochs: Option<String>,
    /// CNN mini-batch size [default: 64].
    #[arg(long)]
    pub batch_size: Option<String>,
    /// CNN ADAM learning rate [default: 0.001].
    #[arg(long)]
    pub learning_rate: Option<String>,
    /// CNN early-stopping patience in epochs, or `off` [default: 10].
    #[arg(long, value_name = "N|off")]
    pub patience: Option<String>,
    /// Share of CNN training data held out for early stopping [default: 0.1].
    #[arg(long)]
    pub validation_fraction: Option<String>,
    /// Convolution blocks [default: 3].
    #[arg(long)]
    pub cnn_blocks: Option<String>,
    /// Filters per convolution [default: 64].
    #[arg(long)]
    pub cnn_filters: Option<String>,
    /// Convolution kernel width [default: 3].
    #[arg(long)]
    pub cnn_kernel: Option<String>,
    /// Max-pool width [default: 2].
    #[arg(long)]
    pub cnn_pool: Option<String>,
    /// Hidden dense units [default: 16].
    #[arg(long)]
    pub cnn_hidden: Option<String>,
    /// Dropout rate [default: 0.25].
    #[arg(long)]
    pub dropout: Option<String>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// null, colon_like, melanoma_like or subtype_like.
    #[arg(long)]
    pub preset: Option<String>,
    /// Spectra per class [default: 200].
    #[arg(long)]
    pub n: Option<String>,
    /// File name prefix [default: the preset name].
    #[arg(long)]
    pub prefix: Option<String>,
    /// Draw all randomness from a bounded (uniform) law.
    #[arg(long)]
    pub bounded_noise: bool,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub pre: PreprocessOpts,
    /// Also restrict the output to this region (LW or HW).
    #[arg(long)]
    pub region: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub pre: PreprocessOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Regions, comma separated [default: LW,HW].
    #[arg(long)]
    pub region: Option<String>,
    /// Methods, comma separated [default: lra,l2d,lrp,pca,cnn].
    #[arg(long)]
    pub methods: Option<String>,
    /// Cross-validation folds [default: 10].
    #[arg(long)]
    pub folds: Option<String>,
}

#[derive(Args, Debug)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub pre: PreprocessOpts,
    #[command(flatten)]
    pub model: ModelOpts,
    /// Regions, comma separated [default: LW,HW].
    #[arg(long)]
    pub region: Option<String>,
    /// lrp, cnn or both [default: lrp,cnn].
    #[arg(long)]
    pub methods: Option<String>,
    /// Held-out share of each class [default: 0.3].
    #[arg(long)]
    pub test_fraction: Option<String>,
    /// Shuffles per feature [default: 30].
    #[arg(long)]
    pub permutations: Option<String>,
    /// ECDF over all derivatives (pooled) or per_wavenumber [default: pooled].
    #[arg(long)]
    pub ecdf: Option<String>,
    /// Also write gnuplot scripts next to the CSVs.
    #[arg(long)]
    pub plots: bool,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Explain(a) => commands::explain(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
