use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use kgrag_core::eval::{
    evaluate, parse_report_csv, report_render, score_offline, write_outputs, EvalError, EvalReport, ReportFormat,
    RunManifest,
};
use kgrag_core::kg::{service, KgSearchOptions, KnowledgeStore, LoadOptions, MissingIdPolicy};
use kgrag_core::rewards::RewardConfig;

/// Exit status when there is nothing to score.
const EXIT_NO_WORK: u8 = 3;
/// Exit status when a run finished but its report is flagged incomplete.
const EXIT_INCOMPLETE: u8 = 2;

#[derive(Parser)]
#[command(name = "kgrag", version, about = "Agentic document + knowledge-graph search: run, score and report")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full evaluation described by a manifest.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
    /// Score a trajectory dump against gold data; emits rewards and loss masks.
    Score {
        #[arg(long)]
        trajectories: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Reward settings as JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for report.json and scores.jsonl.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
    /// Knowledge-graph tools.
    Kg {
        #[command(subcommand)]
        command: KgCommand,
    },
    /// Render a saved report.
    Report {
        /// A report.json, or a CSV rendering.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "table")]
        format: ReportFormat,
    },
}

#[derive(Subcommand)]
enum KgCommand {
    /// Serve `POST /kg/search` over a loaded dump.
    Serve {
        #[arg(long, num_args = 1.., required = true)]
        triples: Vec<PathBuf>,
        #[arg(long)]
        entity_aliases: PathBuf,
        #[arg(long)]
        relation_aliases: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Keep triples whose ids have no alias entry instead of failing.
        #[arg(long)]
        retain_missing: bool,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let rt = tokio::runtime::Runtime::new().expect("tokio runtime");
    match rt.block_on(dispatch(cli.command)) {
        Ok(code) => code,
        Err(err) => {
            if let Some(EvalError::NoWork(path)) = err.downcast_ref::<EvalError>() {
                eprintln!("nothing to score in {}", path.display());
                return ExitCode::from(EXIT_NO_WORK);
            }
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn finish(report: &EvalReport, format: ReportFormat) -> ExitCode {
    print!("{}", report_render(report, format));
    if report.complete {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "report incomplete: {} errors, {} rollouts without a model",
            report.errors.len(),
            report.rows.iter().filter(|r| r.termination == "llm_error").count()
        );
        ExitCode::from(EXIT_INCOMPLETE)
    }
}

async fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { manifest, format } => {
            let manifest = RunManifest::load(&manifest)?;
            let run = evaluate(&manifest).await?;
            eprintln!("outputs written to {}", manifest.output_dir.display());
            Ok(finish(&run.report, format))
        }
        Command::Score {
            trajectories,
            gold,
            config,
            out,
            format,
        } => {
            let config: RewardConfig = match config {
                Some(path) => {
                    let body = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&body).with_context(|| format!("parsing {}", path.display()))?
                }
                None => RewardConfig::default(),
            };
            let run = score_offline(&trajectories, &gold, &config)?;
            if let Some(dir) = out {
                write_outputs(&dir, &run, None)?;
            }
            Ok(finish(&run.report, format))
        }
        Command::Kg {
            command:
                KgCommand::Serve {
                    triples,
                    entity_aliases,
                    relation_aliases,
                    port,
                    host,
                    retain_missing,
                },
        } => {
            let options = LoadOptions {
                missing_ids: if retain_missing {
                    MissingIdPolicy::Retain
                } else {
                    MissingIdPolicy::Reject
                },
            };
            let store = KnowledgeStore::load(&triples, &entity_aliases, &relation_aliases, options)?;
            eprintln!(
                "loaded {} triples, {} entities, {} relations",
                store.triple_count(),
                store.entity_count(),
                store.relation_count()
            );
            service::serve(Arc::new(store), KgSearchOptions::default(), SocketAddr::new(host, port)).await?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { input, format } => {
            let body = std::fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let report = if input.extension().is_some_and(|e| e == "csv") {
                parse_report_csv(&body)?
            } else {
                EvalReport::from_json(&body)?
            };
            print!("{}", report_render(&report, format));
            Ok(ExitCode::SUCCESS)
        }
    }
}
