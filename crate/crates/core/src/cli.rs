//! Command-line interface: `train`, `parse`, `eval` and `oracle-check`.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use crate::encoder::bundle::{load_file, save_file};
use crate::encoder::{EncoderError, Model};
use crate::metrics::{corpus_parseval, MetricsError};
use crate::oracle::brute::MAX_WORDS;
use crate::oracle::verify::{verify_corpus, VerifyOptions};
use crate::oracle::{InjectedFault, OracleError};
use crate::training::{train, Mode, TrainingConfig, TrainingError};
use crate::treebank::{
    prepare, read_tagged, read_trees, tree_to_brackets, write_tree, NormalizationRules, Tree, TreebankError,
};

/// Process exit statuses.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERIC: i32 = 3;
    pub const COUNTEREXAMPLE: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Treebank { path: PathBuf, source: TreebankError },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: EncoderError },
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    #[error("oracle check found {0} counterexample(s)")]
    Counterexample(u64),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Treebank { .. } | CliError::Model { .. } | CliError::Data(_) => exit::DATA,
            CliError::Numeric(_) => exit::NUMERIC,
            CliError::Counterexample(_) => exit::COUNTEREXAMPLE,
        }
    }
}

impl From<TrainingError> for CliError {
    fn from(e: TrainingError) -> Self {
        match e {
            TrainingError::BadConfig(m) => CliError::Usage(m),
            e @ (TrainingError::Diverged { .. } | TrainingError::Encoder(EncoderError::NonFinite(_))) => {
                CliError::Numeric(e.to_string())
            }
            e => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spanparser", version, about = "Greedy span-based constituency parser")]
struct Cli {
    /// Worker threads for sentence-level parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model and write the bundle with the best dev F1.
    Train(TrainArgs),
    /// Parse POS-tagged sentences (`word_TAG` tokens, one sentence per line).
    Parse(ParseArgs),
    /// Score predicted trees against gold trees.
    Eval(EvalArgs),
    /// Check the dynamic oracle against brute force on short sentences.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeName {
    Static,
    Dynamic,
    DynamicExplore,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Bracketed training trees, one per line.
    #[arg(long = "train")]
    train: PathBuf,
    /// Trees scored after every epoch to pick the saved model.
    #[arg(long)]
    dev: PathBuf,
    /// Output model bundle.
    #[arg(long)]
    model: PathBuf,
    /// TOML file with training settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    /// Softmax exponent for dynamic-explore sampling.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Sentences per update.
    #[arg(long)]
    minibatch: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Target fraction of training words replaced by UNK.
    #[arg(long)]
    unk_rate: Option<f64>,
    /// Per-epoch report (tab-separated).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    /// Tagged input; `-` or absent reads stdin.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write trees here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Predicted trees, aligned line by line with `--gold`.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FaultName {
    FlipShiftCase,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long)]
    treebank: PathBuf,
    /// Longest sentence checked. Lengths up to 4 are enumerated
    /// exhaustively; longer ones up to the cap are sampled.
    #[arg(long, default_value_t = 5)]
    max_len: usize,
    /// Random configurations sampled at the capped length.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true, value_enum)]
    inject_fault: Option<FaultName>,
}

fn read_text(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Reads, normalizes and collapses a bracketed treebank.
pub fn load_treebank(path: &Path) -> Result<Vec<Tree>, CliError> {
    let text = read_text(path)?;
    let wrap = |source| CliError::Treebank { path: path.to_path_buf(), source };
    let rules = NormalizationRules::default();
    read_trees(&text)
        .map_err(wrap)?
        .into_iter()
        .map(|t| prepare(t, &rules))
        .collect::<Result<Vec<_>, _>>()
        .map_err(wrap)
}

fn training_config(args: &TrainArgs) -> Result<TrainingConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => toml::from_str::<TrainingConfig>(&read_text(path)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?,
        None => TrainingConfig::default(),
    };
    let mode_name = match args.mode {
        Some(ModeName::Static) => Some("static"),
        Some(ModeName::Dynamic) => Some("dynamic"),
        Some(ModeName::DynamicExplore) => Some("dynamic-explore"),
        None => None,
    };
    match (mode_name, args.alpha) {
        (Some(name), alpha) => cfg.mode = Mode::from_name(name, alpha)?,
        (None, Some(alpha)) => match cfg.mode {
            Mode::DynamicExplore { .. } => cfg.mode = Mode::DynamicExplore { alpha },
            _ => return Err(CliError::Usage("--alpha requires --mode dynamic-explore".into())),
        },
        (None, None) => {}
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.minibatch {
        cfg.minibatch = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.dropout {
        cfg.hyper.dropout = v;
    }
    if let Some(v) = args.unk_rate {
        cfg.unk_rate = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(args: &TrainArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = training_config(args)?;
    let corpus = load_treebank(&args.train)?;
    let dev = load_treebank(&args.dev)?;
    let mut lines = Vec::new();
    let outcome = train(&corpus, &dev, &cfg, |r| lines.push(r.to_string()))?;
    for line in &lines {
        writeln!(stdout, "{line}").map_err(stdout_err)?;
    }
    writeln!(stdout, "best epoch {}", outcome.best_epoch).map_err(stdout_err)?;
    save_file(&outcome.best, &args.model).map_err(|source| CliError::Model { path: args.model.clone(), source })?;
    if let Some(path) = &args.report {
        write_text(path, &outcome.report_tsv())?;
    }
    Ok(())
}

fn stdout_err(source: io::Error) -> CliError {
    CliError::Io { path: PathBuf::from("<stdout>"), source }
}

fn load_model(path: &Path) -> Result<Model, CliError> {
    load_file(path).map_err(|source| CliError::Model { path: path.to_path_buf(), source })
}

fn cmd_parse(args: &ParseArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let model = load_model(&args.model)?;
    let input = args.input.clone().unwrap_or_else(|| PathBuf::from("-"));
    let sentences = read_tagged(&read_text(&input)?).map_err(|source| CliError::Treebank { path: input, source })?;
    let trees = sentences
        .par_iter()
        .map(|tokens| model.parse(tokens).map(|(tree, _)| write_tree(&tree)))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            EncoderError::NonFinite(_) => CliError::Numeric(e.to_string()),
            e => CliError::Data(e.to_string()),
        })?;
    let mut out = String::new();
    for t in trees {
        out.push_str(&t);
        out.push('\n');
    }
    match &args.output {
        Some(path) => write_text(path, &out),
        None => stdout.write_all(out.as_bytes()).map_err(stdout_err),
    }
}

fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let pred = load_treebank(&args.pred)?;
    let gold = load_treebank(&args.gold)?;
    if pred.len() != gold.len() {
        return Err(CliError::Data(format!("{} predicted trees but {} gold trees", pred.len(), gold.len())));
    }
    for (k, (p, g)) in pred.iter().zip(&gold).enumerate() {
        if p.len() != g.len() {
            return Err(CliError::Data(format!(
                "sentence {}: {} predicted words but {} gold words",
                k + 1,
                p.len(),
                g.len()
            )));
        }
    }
    let pb: Vec<_> = pred.iter().map(tree_to_brackets).collect();
    let gb: Vec<_> = gold.iter().map(tree_to_brackets).collect();
    let report = corpus_parseval(pb.iter().zip(&gb)).map_err(|e: MetricsError| CliError::Data(e.to_string()))?;
    writeln!(stdout, "{report}").map_err(stdout_err)
}

fn cmd_oracle_check(args: &OracleArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.max_len == 0 || args.max_len > MAX_WORDS {
        return Err(CliError::Usage(format!(
            "--max-len {} is not supported: brute-force enumeration is limited to {MAX_WORDS} words; use --max-len 5 (default)",
            args.max_len
        )));
    }
    let trees = load_treebank(&args.treebank)?;
    let opts = VerifyOptions {
        exhaustive_max_len: args.max_len.min(4),
        sample_max_len: args.max_len,
        sample_count: args.samples,
        seed: args.seed,
        fault: args.inject_fault.map(|FaultName::FlipShiftCase| InjectedFault::FlipShiftCase),
        ..VerifyOptions::default()
    };
    let report = verify_corpus(&trees, &opts).map_err(|e| match e {
        OracleError::Guard(m) => CliError::Usage(m),
        e => CliError::Data(e.to_string()),
    })?;
    write!(stdout, "{report}").map_err(stdout_err)?;
    if report.configurations == 0 {
        return Err(CliError::Data(format!("no sentence of at most {} words to enumerate", args.max_len)));
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Counterexample(report.failures()))
    }
}

/// Runs the command line `args` (including the program name) and returns
/// the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => exit::SUCCESS,
                _ => exit::USAGE,
            };
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            let _ = writeln!(stderr, "error: --threads must be positive");
            return exit::USAGE;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return exit::USAGE;
        }
    };
    let mut buffer: Vec<u8> = Vec::new();
    let result = pool.install(|| match &cli.command {
        Command::Train(a) => cmd_train(a, &mut buffer),
        Command::Parse(a) => cmd_parse(a, &mut buffer),
        Command::Eval(a) => cmd_eval(a, &mut buffer),
        Command::OracleCheck(a) => cmd_oracle_check(a, &mut buffer),
    });
    let written = stdout.write_all(&buffer).and_then(|()| stdout.flush()).map_err(stdout_err);
    match result.and(written) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
