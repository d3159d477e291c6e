use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heritage_core::corpus::{bundled_corpus_dir, load_corpus};
use heritage_core::guardrails::lint::lint_corpus;
use heritage_core::guardrails::TaskTheme;
use heritage_core::imaging::{bundled_workflow_path, PipelineConfig};
use heritage_core::lang::Lang;
use heritage_core::store::{
    bundled_pilot_logs_path, compute_summary, load_pilot_logs, replay_pilot_logs, summary_tsv, SessionStore,
};
use heritage_studio::{serve, Backends, ServerConfig, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "heritage-studio",
    version,
    about = "Diaolou heritage studio gateway and tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long, env = "STUDIO_CORPUS", default_value_os_t = bundled_corpus_dir())]
        corpus: PathBuf,
        #[arg(long, env = "STUDIO_DATA", default_value = "data")]
        data: PathBuf,
        #[arg(long, env = "STUDIO_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, value_parser = clap::value_parser!(Lang), default_value = "zh")]
        lang_default: Lang,
        #[arg(long, env = "STUDIO_WORKFLOW", default_value_os_t = bundled_workflow_path())]
        workflow: PathBuf,
        /// Generation requests allowed per client address per minute.
        #[arg(long, default_value_t = 10)]
        generate_per_minute: usize,
    },
    /// Check the rejection lexicon and print the active rule count per theme.
    #[command(long_flag = "lexicon-lint")]
    LexiconLint {
        #[arg(long, default_value_os_t = bundled_corpus_dir())]
        corpus: PathBuf,
    },
    /// Print per-theme iteration and image statistics as TSV.
    ///
    /// Reads the session log in `--data`, or replays a pilot-log fixture
    /// when no data directory is given.
    #[command(long_flag = "export-summary")]
    ExportSummary {
        #[arg(long, conflicts_with = "fixture")]
        data: Option<PathBuf>,
        #[arg(long)]
        fixture: Option<PathBuf>,
        #[arg(long)]
        theme: Option<TaskTheme>,
    },
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Serve {
            corpus,
            data,
            bind,
            lang_default,
            workflow,
            generate_per_minute,
        } => {
            let config = ServerConfig {
                corpus_dir: corpus,
                data_dir: data,
                bind,
                workflow,
                settings: Settings {
                    lang_default,
                    generate_per_minute,
                },
                pipeline: PipelineConfig::default(),
            };
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let backends = Backends::from_env(&config.workflow)?;
                let handle = serve(&config, backends).await?;
                println!("listening on {}", handle.base_url());
                tokio::signal::ctrl_c().await?;
                handle.shutdown().await?;
                anyhow::Ok(())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Command::LexiconLint { corpus } => {
            let corpus = load_corpus(&corpus)?;
            let report = lint_corpus(&corpus);
            for e in &report.errors {
                println!("error\t{e}");
            }
            for (theme, n) in &report.active_rules {
                println!("{theme}\t{n}");
            }
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::ExportSummary { data, fixture, theme } => {
            let store = match data {
                Some(dir) => SessionStore::open(&dir)?,
                None => {
                    let rows = load_pilot_logs(fixture.unwrap_or_else(bundled_pilot_logs_path))?;
                    let store = SessionStore::in_memory();
                    replay_pilot_logs(&store, &rows)?;
                    store
                }
            };
            print!("{}", summary_tsv(&compute_summary(&store.snapshot(), theme)));
            Ok(ExitCode::SUCCESS)
        }
    }
}
