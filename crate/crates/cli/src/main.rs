//! `toxiclass`: run toxic-comment experiments from a JSON configuration.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use toxiclass::eval::markdown_table;
use toxiclass::pipeline::{self, ExperimentConfig, Layout, LeakageMode, Overrides, PipelineError};

#[derive(Debug, Parser)]
#[command(
    name = "toxiclass",
    version,
    about = "Binary toxic-comment classification experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest, preprocess and build the vocabulary, filling the stage cache.
    Prepare(ExperimentArgs),
    /// Train every configured model and write the model files.
    Train(ExperimentArgs),
    /// Evaluate previously trained model files on the test split.
    Evaluate(ExperimentArgs),
    /// Train and evaluate, writing models, reports and summary.md.
    Experiment(ExperimentArgs),
    /// Classify one text with a model file or ensemble manifest.
    Predict {
        /// Model file or ensemble manifest.
        #[arg(long)]
        model: PathBuf,
        /// Text to classify; read from stdin when absent.
        #[arg(long)]
        text: Option<String>,
    },
    /// Compare two configurations with Welch's t-test over seeded runs.
    Ttest {
        #[arg(long = "config-a")]
        config_a: PathBuf,
        #[arg(long = "config-b")]
        config_b: PathBuf,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[command(flatten)]
        overrides: OverrideArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Debug, Args)]
struct OverrideArgs {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "leakage-mode", value_parser = parse_leakage)]
    leakage_mode: Option<LeakageMode>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    dictionary: Option<PathBuf>,
}

fn parse_leakage(s: &str) -> Result<LeakageMode, String> {
    s.parse().map_err(|e: pipeline::ConfigError| e.to_string())
}

impl OverrideArgs {
    fn to_overrides(&self) -> Overrides {
        Overrides {
            dataset: self.dataset.clone(),
            seed: self.seed,
            leakage_mode: self.leakage_mode,
            stopwords: self.stopwords.clone(),
            dictionary: self.dictionary.clone(),
        }
    }
}

fn load(path: &Path, overrides: &OverrideArgs) -> pipeline::Result<ExperimentConfig> {
    Ok(ExperimentConfig::load(path, &overrides.to_overrides())?)
}

fn print_json<T: serde::Serialize + ?Sized>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn run(command: Command) -> pipeline::Result<()> {
    match command {
        Command::Prepare(args) => {
            let config = load(&args.config, &args.overrides)?;
            let prepared = pipeline::prepare(&config, &Layout::new(&args.out))?;
            let counts = prepared.counts();
            print_json(&serde_json::json!({
                "documents": prepared.labels.len(),
                "toxic": counts.toxic,
                "non_toxic": counts.non_toxic,
                "vocabulary": prepared.vocab.len(),
            }));
        }
        Command::Train(args) => {
            let config = load(&args.config, &args.overrides)?;
            for path in pipeline::train(&config, &args.out)? {
                println!("{}", path.display());
            }
        }
        Command::Evaluate(args) => {
            let config = load(&args.config, &args.overrides)?;
            print!("{}", markdown_table(&pipeline::evaluate(&config, &args.out)?));
        }
        Command::Experiment(args) => {
            let config = load(&args.config, &args.overrides)?;
            print!("{}", markdown_table(&pipeline::run_experiment(&config, &args.out)?));
        }
        Command::Predict { model, text } => {
            let text = match text {
                Some(t) => t,
                None => {
                    let mut buf = String::new();
                    std::io::stdin()
                        .read_to_string(&mut buf)
                        .map_err(|e| PipelineError::data(pipeline::Stage::Predict, format!("stdin: {e}")))?;
                    buf
                }
            };
            print_json(&pipeline::predict_text(&model, &text)?);
        }
        Command::Ttest {
            config_a,
            config_b,
            runs,
            overrides,
            out,
        } => {
            let a = load(&config_a, &overrides)?;
            let b = load(&config_b, &overrides)?;
            print_json(&pipeline::run_ttest(&a, &b, runs, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
