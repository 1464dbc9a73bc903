//! `npd`: synthesize corpora, pretrain embeddings, train, evaluate, ablate
//! and predict from the command line.
//!
//! Exit status is 0 on success, 1 for invalid input or configuration and 2
//! when a run aborts (divergence, I/O failure).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npd_core::model::ModelVariant;
use npd_core::text::TokenizerMode;
use npd_core::NpdError;

#[derive(Parser, Debug)]
#[command(name = "npd", version, about = "Emotion detection with adversarial personal-attribute discriminators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic planted-correlation corpus.
    Synth(SynthArgs),
    /// Build the vocabulary and pretrain skip-gram embeddings on the training split.
    Embed(EmbedArgs),
    /// Train one model variant and write a checkpoint plus training log.
    Train(TrainArgs),
    /// Score a checkpoint on the test split.
    Eval(EvalArgs),
    /// Train and evaluate a grid of variants and seeds.
    Ablate(AblateArgs),
    /// Read posts from stdin and print predictions as JSON lines.
    Predict(PredictArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output corpus (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// JSON file with generator settings; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_posts: Option<usize>,
    #[arg(long)]
    num_locations: Option<usize>,
    /// Remove every attribute marker and attribute/emotion correlation.
    #[arg(long)]
    null_signal: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Output embedding table (text format, one token per line).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    vocab_size: usize,
    #[arg(long, default_value_t = 100)]
    embed_dim: usize,
    #[arg(long, default_value_t = 5)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 0.025)]
    learning_rate: f64,
    #[arg(long, default_value = "char")]
    tokenizer: TokenizerMode,
    /// Seeds the split (only training text is embedded) and skip-gram.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args, Debug, Clone)]
struct TrainFlags {
    /// JSON file with training settings; flags below override it.
    #[arg(long)]
    train_config: Option<PathBuf>,
    #[arg(long)]
    lr: Option<f64>,
    /// Emotion, gender and location loss weights, e.g. `1,1,1`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    /// Disable global gradient-norm clipping.
    #[arg(long)]
    no_clip: bool,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    attention_dim: Option<usize>,
    #[arg(long)]
    head_dim: Option<usize>,
    /// Update the embedding table during training.
    #[arg(long)]
    fine_tune: bool,
    /// Run batch examples on one thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long, default_value = "NPD")]
    variant: ModelVariant,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Training log (TSV); defaults to `<out>.log.tsv`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Defaults to the tokenizer recorded next to the embeddings.
    #[arg(long)]
    tokenizer: Option<TokenizerMode>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Split seed; defaults to the seed stored in the checkpoint.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the report table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Pretrained table; built from the training split when omitted.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "LSTM,LSTM_ATTRIBUTES,LSTM_ATTENTION,LSTM_ADVERSARIAL,NPD_GENDER,NPD_LOCATION,NPD")]
    variants: Vec<ModelVariant>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    seeds: Vec<u64>,
    /// Seed of the shared train/dev/test split.
    #[arg(long, default_value_t = 1)]
    split_seed: u64,
    #[arg(long)]
    tokenizer: Option<TokenizerMode>,
    /// Used only when embeddings are built here.
    #[arg(long, default_value_t = 2000)]
    vocab_size: usize,
    /// Used only when embeddings are built here.
    #[arg(long, default_value_t = 100)]
    embed_dim: usize,
    /// Concurrent training runs (1 runs them one after another).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
enum CliError {
    Invalid(String),
    Runtime(String),
}

impl From<NpdError> for CliError {
    fn from(e: NpdError) -> Self {
        match e {
            NpdError::Divergence { .. } | NpdError::Io { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Embed(a) => commands::embed(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a),
        Command::Predict(a) => commands::predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("aborted: {msg}");
            ExitCode::from(2)
        }
    }
}
