use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};

use parrag_core::config::{AppConfig, ProviderMode};
use parrag_core::eval::sweep::{load_samples, sweep, synthetic_samples, SweepGrid};
use parrag_core::eval::{load_dataset, run_benchmark, BenchOptions, DatasetFormat, LatencySource};
use parrag_core::retrieval::{load_corpus, CorpusIndex};
use parrag_core::{Ablation, Error, Question, Result, VerifierConfig};

#[derive(Parser)]
#[command(
    name = "parrag",
    version,
    about = "Plan, act and review retrieval-augmented QA"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a corpus index (term statistics and dense vectors).
    Index {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        providers: ProviderArgs,
    },
    /// Answer one question.
    Ask {
        question: String,
        #[arg(long, default_value = "q")]
        id: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a dataset and report EM, Acc, RTPQ and CTPQ.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "native")]
        dataset_format: String,
        /// Evaluate only the first N records.
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Agreement grid over gamma, h0 and C_t.
    Sweep {
        /// JSONL of {accuracy, consistency, hop, label}.
        #[arg(long, conflicts_with = "synthetic")]
        input: Option<PathBuf>,
        /// Generate N labelled samples instead of reading --input.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Verifier used to label synthetic samples (defaults to the config).
        #[arg(long)]
        truth_gamma: Option<f64>,
        #[arg(long)]
        truth_h0: Option<f64>,
        #[arg(long)]
        truth_threshold: Option<f64>,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ProviderArgs {
    /// Answer provider calls from a recorded JSONL log.
    #[arg(long, conflicts_with = "record")]
    replay: Option<PathBuf>,
    /// Record live provider calls to a JSONL log.
    #[arg(long)]
    record: Option<PathBuf>,
}

impl ProviderArgs {
    fn mode(&self) -> ProviderMode {
        match (&self.replay, &self.record) {
            (Some(p), _) => ProviderMode::Replay(p.clone()),
            (None, Some(p)) => ProviderMode::Record(p.clone()),
            (None, None) => ProviderMode::Live,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Corpus JSONL, indexed on the fly.
    #[arg(long, required_unless_present = "index", conflicts_with = "index")]
    corpus: Option<PathBuf>,
    /// Prebuilt index from `parrag index`.
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    no_plan: bool,
    #[arg(long)]
    no_review: bool,
    #[arg(long)]
    top_k: Option<usize>,
    #[command(flatten)]
    providers: ProviderArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<AppConfig> {
    match path {
        Some(p) => AppConfig::load(p),
        None => Ok(AppConfig::default()),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn load_index(cfg: &AppConfig, run: &RunArgs, mode: &ProviderMode) -> Result<CorpusIndex> {
    let embedder = cfg.embedder(mode)?;
    let index = match (&run.index, &run.corpus) {
        (Some(p), _) => CorpusIndex::load(p)?,
        (None, Some(c)) => CorpusIndex::build(load_corpus(c)?, Some(embedder.as_ref()))?,
        (None, None) => return Err(Error::Config("pass --corpus or --index".into())),
    };
    if index.embedder_id.as_deref() != Some(embedder.id()) {
        warn!(
            "index vectors come from {:?} but queries are embedded with {}",
            index.embedder_id,
            embedder.id()
        );
    }
    Ok(index)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Index {
            corpus,
            out,
            providers,
        } => {
            let embedder = cfg.embedder(&providers.mode())?;
            let docs = load_corpus(&corpus)?;
            let index = CorpusIndex::build(docs, Some(embedder.as_ref()))?;
            index.save(&out)?;
            info!("indexed {} documents into {}", index.len(), out.display());
            Ok(())
        }
        Command::Ask { question, id, run } => {
            if let Some(k) = run.top_k {
                cfg.retrieval.top_k = k;
            }
            let mode = run.providers.mode();
            let index = Arc::new(load_index(&cfg, &run, &mode)?);
            let settings = cfg.engine_settings(Ablation {
                no_plan: run.no_plan,
                no_review: run.no_review,
            });
            let engine = cfg.build(&mode)?.into_engine(settings, index);
            let q = Question::original(id, question)?;
            let result = engine.run_query(&q).map_err(|e| {
                for line in e.transcript.iter().map(|ev| ev.line()) {
                    eprintln!("  {line}");
                }
                e.error
            })?;
            let text = match run.format {
                Format::Json => serde_json::to_string_pretty(&result).expect("result serializes"),
                Format::Table => {
                    let mut s = format!("answer: {}\n", result.final_answer);
                    for t in &result.trajectories {
                        s.push_str(&format!(
                            "step {} [{}{}] {} -> {}\n",
                            t.step_index,
                            t.action.as_str(),
                            if t.answer.revised { ", revised" } else { "" },
                            t.question.text,
                            t.answer.text
                        ));
                    }
                    for w in &result.warnings {
                        s.push_str(&format!("warning: {w}\n"));
                    }
                    s
                }
            };
            emit(&text, run.out.as_deref())
        }
        Command::Bench {
            dataset,
            dataset_format,
            limit,
            workers,
            run,
        } => {
            if let Some(k) = run.top_k {
                cfg.retrieval.top_k = k;
            }
            let format: DatasetFormat = dataset_format.parse()?;
            let mut records = load_dataset(&dataset, format)?;
            if let Some(n) = limit {
                records.truncate(n);
            }
            let mode = run.providers.mode();
            let latency = match mode {
                ProviderMode::Replay(_) => LatencySource::Logged,
                _ => LatencySource::WallClock,
            };
            let index = Arc::new(load_index(&cfg, &run, &mode)?);
            let settings = cfg.engine_settings(Ablation {
                no_plan: run.no_plan,
                no_review: run.no_review,
            });
            let engine = cfg.build(&mode)?.into_engine(settings, index);
            let judge = engine.providers.judge.clone();
            let report = run_benchmark(
                &engine,
                &records,
                judge.as_ref(),
                BenchOptions {
                    workers: workers.unwrap_or(cfg.workers),
                    latency,
                },
            )?;
            let text = match run.format {
                Format::Json => report.to_json(),
                Format::Table => report.to_table(),
            };
            emit(&text, run.out.as_deref())
        }
        Command::Sweep {
            input,
            synthetic,
            seed,
            truth_gamma,
            truth_h0,
            truth_threshold,
            format,
            out,
        } => {
            let samples = match (input, synthetic) {
                (Some(p), _) => load_samples(&p)?,
                (None, n) => {
                    let truth = VerifierConfig::new(
                        truth_threshold.unwrap_or(cfg.verifier.threshold),
                        truth_h0.unwrap_or(cfg.verifier.h0),
                        truth_gamma.unwrap_or(cfg.verifier.gamma),
                    )?;
                    synthetic_samples(n.unwrap_or(2000), seed, &truth)?
                }
            };
            let grid = SweepGrid::default();
            let report = sweep(&samples, &grid)?;
            let text = match format {
                Format::Json => report.to_json(),
                Format::Table => report.to_table(&grid),
            };
            emit(&text, out.as_deref())
        }
    }
}
