use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::error;

use signa::SignaError;

mod commands;
mod manifest;

#[derive(Debug, Parser)]
#[command(
    name = "signa",
    version,
    about = "Single-view graph contrastive learning toolkit"
)]
struct Cli {
    /// Run seed; overrides the seed in a config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Arithmetic precision; overrides the config file.
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,
    /// Worker threads. Computation is single-threaded; the value is recorded in manifests.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Only print warnings and errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionArg {
    F32,
    F64,
}

impl From<PrecisionArg> for signa::diffcore::Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::F32 => signa::diffcore::Precision::F32,
            PrecisionArg::F64 => signa::diffcore::Precision::F64,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Edge list, one `u v` pair per line.
    #[arg(long)]
    edges: PathBuf,
    /// Feature CSV, one row per node.
    #[arg(long)]
    features: PathBuf,
    /// Label file, one integer per line.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// The feature CSV starts with a header row.
    #[arg(long)]
    feature_header: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EvalMode {
    Classify,
    Cluster,
    Histograms,
    Timing,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Global and local homophily statistics.
    Homophily {
        #[command(flatten)]
        graph: GraphArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an encoder and write a checkpoint.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        mask_rate: Option<f64>,
        /// Ablation variant, e.g. `no_dropout` or `nfm=0.3`.
        #[arg(long)]
        ablation: Option<String>,
    },
    /// Evaluate a trained encoder.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_enum)]
        mode: EvalMode,
        #[arg(long)]
        out: PathBuf,
        /// Random splits for classification.
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        /// Random node pairs for histograms instead of all pairs.
        #[arg(long)]
        pairs: Option<usize>,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
    },
    /// Export inference embeddings as CSV.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and classify several ablation variants with shared seeds.
    Ablate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        /// Comma-separated variants, e.g. `none,no_dropout,nfm=0.3,all_mask`.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "none,no_dropout,no_stoch_mask,all_mask,no_all"
        )]
        variants: Vec<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        runs: usize,
    },
    /// Generate a two-or-more block stochastic block model graph.
    Sbm {
        #[arg(long, value_delimiter = ',', default_value = "100,100")]
        blocks: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        p_in: f64,
        #[arg(long, default_value_t = 0.01)]
        p_out: f64,
        /// Coordinates whose mean shifts by `separation` per block.
        #[arg(long, default_value_t = 12)]
        informative: usize,
        /// Extra zero-mean coordinates.
        #[arg(long, default_value_t = 52)]
        noise_dims: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

pub struct Globals {
    pub seed: Option<u64>,
    pub precision: Option<signa::diffcore::Precision>,
    pub threads: usize,
}

/// 1 usage or config, 2 data, 3 numeric failure.
fn exit_code(e: &SignaError) -> u8 {
    match e {
        SignaError::Config(_) | SignaError::InvalidArgument(_) | SignaError::Contract(_) => 1,
        SignaError::Domain { .. }
        | SignaError::DegenerateEmbedding { .. }
        | SignaError::NonFinite { .. }
        | SignaError::Optimization { .. }
        | SignaError::NonFiniteLoss { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    if cli.threads == 0 {
        error!("--threads must be at least 1");
        return ExitCode::from(1);
    }
    let globals = Globals {
        seed: cli.seed,
        precision: cli.precision.map(Into::into),
        threads: cli.threads,
    };
    let result = match cli.command {
        Command::Homophily { graph, out } => commands::homophily(&globals, &graph, &out),
        Command::Train {
            config,
            graph,
            out,
            epochs,
            learning_rate,
            mask_rate,
            ablation,
        } => commands::train(
            &globals,
            &config,
            &graph,
            &out,
            commands::Overrides {
                epochs,
                learning_rate,
                mask_rate,
                ablation,
            },
        ),
        Command::Eval {
            checkpoint,
            graph,
            mode,
            out,
            runs,
            bins,
            pairs,
            repeats,
        } => commands::eval(
            &globals,
            &checkpoint,
            &graph,
            &out,
            commands::EvalOptions {
                mode,
                runs,
                bins,
                pairs,
                repeats,
            },
        ),
        Command::Embed {
            checkpoint,
            graph,
            out,
        } => commands::embed(&globals, &checkpoint, &graph, &out),
        Command::Ablate {
            config,
            graph,
            variants,
            out,
            runs,
        } => commands::ablate(&globals, &config, &graph, &variants, &out, runs),
        Command::Sbm {
            blocks,
            p_in,
            p_out,
            informative,
            noise_dims,
            separation,
            sigma,
            out,
        } => commands::sbm(
            &globals,
            signa::graphdata::SbmParams::shifted_means(
                blocks,
                p_in,
                p_out,
                informative,
                separation,
                sigma,
            )
            .with_noise_dims(noise_dims),
            &out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
