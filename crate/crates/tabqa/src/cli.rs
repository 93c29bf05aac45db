//! Command-line interface: `ask` answers one question, `bench` scores a
//! dataset.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tabqa_core::eval::DatasetKind;
use tabqa_core::prompt::FORCE_ANSWER_SUFFIX;
use tabqa_core::table::serialize_for_prompt;
use tabqa_core::{Agent, AgentConfig, AgentError, Chain, CompletionBackend, Demonstration, Strategy};

use crate::backend::{ApiStyle, CacheError, HttpBackend, RecordingBackend, ReplayBackend};
use crate::bench::{report_json, report_text, run_benchmark, BenchInputs};
use crate::config::{BackendKind, ConfigError, RunConfig};
use crate::datasets::{load_dataset, DatasetError};
use crate::demos::{default_demos, load_demos, DemoError};
use crate::executor::LocalExecutor;
use crate::sidecar::{SidecarError, SidecarPool};
use crate::table_io::{load_table, LoadError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    None,
    Simple,
    Tree,
    Exec,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Strategy {
        match s {
            StrategyArg::None => Strategy::None,
            StrategyArg::Simple => Strategy::Simple,
            StrategyArg::Tree => Strategy::Tree,
            StrategyArg::Exec => Strategy::Exec,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Wikitq,
    Tabfact,
    Fetaqa,
}

impl From<KindArg> for DatasetKind {
    fn from(k: KindArg) -> DatasetKind {
        match k {
            KindArg::Wikitq => DatasetKind::WikiTq,
            KindArg::Tabfact => DatasetKind::TabFact,
            KindArg::Fetaqa => DatasetKind::FeTaQa,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Completions,
    Chat,
}

#[derive(Debug, Parser)]
#[command(
    name = "tabqa",
    version,
    about = "Answer questions over tables with an LLM that writes SQL and Python"
)]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Default, Args)]
pub struct GlobalOpts {
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Samples per step (voting strategies).
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Iteration limit k: call k is forced to answer.
    #[arg(long, global = true)]
    pub limit: Option<usize>,
    /// Disable the script executor.
    #[arg(long, global = true)]
    pub sql_only: bool,
    /// JSON file of few-shot demonstrations.
    #[arg(long, global = true)]
    pub demos: Option<PathBuf>,
    /// Append live responses to this JSON-lines store.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Serve responses from this store only.
    #[arg(long, global = true)]
    pub replay: Option<PathBuf>,
    /// Print every step of the answering chain.
    #[arg(long, global = true)]
    pub trace: bool,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Maximum rows rendered per table in prompts.
    #[arg(long, global = true)]
    pub row_cap: Option<usize>,
    /// Command that starts the script sidecar.
    #[arg(long, global = true)]
    pub sidecar: Option<String>,
    /// Script execution timeout in seconds.
    #[arg(long, global = true)]
    pub timeout: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, global = true)]
    pub endpoint: Option<String>,
    #[arg(long, global = true)]
    pub model: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question about a table file.
    Ask {
        /// CSV, TSV or JSON-rows table.
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        question: String,
    },
    /// Run a benchmark file and write report.json and report.txt.
    Bench {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Evaluate only the first N instances.
        #[arg(long)]
        max_instances: Option<usize>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Table(#[from] LoadError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Demos(#[from] DemoError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Sidecar(#[from] SidecarError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl GlobalOpts {
    /// Merges flags over the config file; flags win.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let a = &mut cfg.agent;
        if let Some(s) = self.strategy {
            a.strategy = Some(s.into());
        }
        a.n = self.n.or(a.n);
        a.temperature = self.temperature.or(a.temperature);
        a.max_iterations = self.limit.or(a.max_iterations);
        if self.sql_only {
            a.sql_only = Some(true);
        }
        a.row_cap = self.row_cap.or(a.row_cap);
        cfg.demos = self.demos.clone().or(cfg.demos);
        cfg.cache = self.cache.clone().or(cfg.cache);
        cfg.replay = self.replay.clone().or(cfg.replay);
        cfg.workers = self.workers.or(cfg.workers);
        cfg.sidecar.command = self.sidecar.clone().or(cfg.sidecar.command);
        cfg.sidecar.timeout_secs = self.timeout.or(cfg.sidecar.timeout_secs);
        if let Some(b) = self.backend {
            cfg.backend.kind = match b {
                BackendArg::Completions => BackendKind::Completions,
                BackendArg::Chat => BackendKind::Chat,
            };
        }
        if let Some(e) = &self.endpoint {
            cfg.backend.endpoint = e.clone();
        }
        cfg.backend.model = self.model.clone().or(cfg.backend.model);
        Ok(cfg)
    }
}

/// Replay store, or a live client optionally wrapped by the recorder.
pub fn build_backend(cfg: &RunConfig) -> Result<Box<dyn CompletionBackend + Send + Sync>, CliError> {
    if let Some(path) = &cfg.replay {
        if cfg.cache.is_some() {
            return Err(CliError::Usage("--cache and --replay are mutually exclusive".into()));
        }
        return Ok(Box::new(ReplayBackend::open(path)?));
    }
    let model = cfg
        .backend
        .model
        .clone()
        .ok_or_else(|| CliError::Usage("a live backend needs --model (or use --replay)".into()))?;
    let style = match cfg.backend.kind {
        BackendKind::Completions => ApiStyle::Completions,
        BackendKind::Chat => ApiStyle::Chat,
    };
    let key = std::env::var(&cfg.backend.api_key_env).ok();
    let live = HttpBackend::new(&cfg.backend.endpoint, &model, key, style);
    match &cfg.cache {
        Some(path) => Ok(Box::new(RecordingBackend::open(live, path)?)),
        None => Ok(Box::new(live)),
    }
}

pub fn build_executor(cfg: &RunConfig, agent: &AgentConfig) -> Result<LocalExecutor, CliError> {
    let pool = match &cfg.sidecar.command {
        Some(cmd) if !agent.sql_only => Some(SidecarPool::new(cmd, cfg.sidecar_timeout())?),
        _ => None,
    };
    Ok(LocalExecutor::new(pool))
}

fn demos_for(cfg: &RunConfig, kind: DatasetKind) -> Result<Vec<Demonstration>, CliError> {
    match &cfg.demos {
        Some(path) => Ok(load_demos(path)?),
        None => Ok(default_demos(kind)),
    }
}

fn write_trace(out: &mut dyn Write, chain: &Chain, row_cap: Option<usize>) -> std::io::Result<()> {
    let mut k = 0;
    for step in &chain.steps {
        let turn = step.action.raw.trim();
        if step.forced {
            writeln!(out, "ReAcTable:{FORCE_ANSWER_SUFFIX}{turn}\n")?;
        } else {
            writeln!(
                out,
                "ReAcTable: {}\n",
                turn.strip_prefix("ReAcTable:").unwrap_or(turn).trim()
            )?;
        }
        if let Some(t) = &step.table {
            k += 1;
            writeln!(
                out,
                "Intermediate table (T{k}):\n{}\n",
                serialize_for_prompt(t, row_cap)
            )?;
        }
        if let Some(f) = &step.failure {
            writeln!(out, "Execution failed ({}): {}\n", f.kind, f.detail)?;
        }
    }
    Ok(())
}

fn io_out(e: std::io::Error) -> CliError {
    CliError::Output {
        path: "<stdout>".into(),
        source: e,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Output {
        path: path.display().to_string(),
        source,
    })
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = cli.opts.resolve()?;
    let agent_cfg = cfg.agent_config();
    agent_cfg.validate()?;
    match cli.command {
        Command::Ask { table, question } => {
            let table = load_table(&table)?;
            let demos = demos_for(&cfg, DatasetKind::WikiTq)?;
            let backend = build_backend(&cfg)?;
            let executor = build_executor(&cfg, &agent_cfg)?;
            let agent = Agent::new(backend.as_ref(), &executor, &demos, agent_cfg.clone())?;
            let outcome = agent.run(&table, &question)?;
            if cli.opts.trace {
                write_trace(out, &outcome.trace, agent_cfg.prompt.row_cap).map_err(io_out)?;
            }
            writeln!(out, "{}", outcome.answer).map_err(io_out)?;
        }
        Command::Bench {
            dataset,
            kind,
            out: dir,
            max_instances,
        } => {
            let kind = DatasetKind::from(kind);
            let mut instances = load_dataset(&dataset, kind)?;
            if let Some(m) = max_instances {
                instances.truncate(m);
            }
            let demos = demos_for(&cfg, kind)?;
            let backend = build_backend(&cfg)?;
            let executor = build_executor(&cfg, &agent_cfg)?;
            let workers = cfg
                .workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let report = run_benchmark(&BenchInputs {
                kind,
                instances: &instances,
                config: &agent_cfg,
                demos: &demos,
                backend: backend.as_ref(),
                executor: &executor,
                workers,
            })?;
            fs::create_dir_all(&dir).map_err(|source| CliError::Output {
                path: dir.display().to_string(),
                source,
            })?;
            write_file(&dir.join("report.json"), &report_json(&report))?;
            let text = report_text(&report);
            write_file(&dir.join("report.txt"), &text)?;
            out.write_all(text.as_bytes()).map_err(io_out)?;
        }
    }
    Ok(())
}
