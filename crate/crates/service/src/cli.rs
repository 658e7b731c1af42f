//! Command-line verbs. `run` returns the process exit code: 0 success,
//! 1 a failed check or runtime error, 2 a usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use netlingua_core::agent::{
    extract_change_set, parse_python_literal, read_transcript, replay_session, AgentContext, MockBackend, MockScript,
    TurnRecord,
};
use netlingua_core::eval::{self, Format, RunSpec};
use netlingua_core::memory::{Mode, StoreKind, DEFAULT_K};
use netlingua_core::state::{apply_change_set, ChangeSet};
use netlingua_core::validator::validate_after_apply;

use crate::app::{self, AppState};
use crate::config::{load_state, BackendKind, ServiceConfig};

#[derive(Debug, Parser)]
#[command(name = "netlingua", version, about = "Natural-language configuration for SONiC networks")]
pub struct Cli {
    /// Service config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Network state: a directory of per-device config DBs or a snapshot file.
    #[arg(long, global = true)]
    pub state_dir: Option<PathBuf>,
    /// Directory of .yang modules.
    #[arg(long, global = true)]
    pub schema_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StoreArg {
    State,
    IrDoc,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Nl,
    Raw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    MarkdownTable,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the HTTP/WebSocket service.
    Serve {
        #[arg(long, value_enum)]
        backend: Option<BackendKind>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        sessions_dir: Option<PathBuf>,
    },
    /// Run an evaluation spec and print the summary table.
    Eval {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory; overrides the spec.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Repeatable; all formats when omitted.
        #[arg(long, value_enum)]
        format: Vec<FormatArg>,
    },
    /// Check a change set against a network state.
    Validate { changeset: PathBuf, state: Option<PathBuf> },
    /// Apply a change set and print the resulting snapshot.
    Apply {
        changeset: PathBuf,
        state: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Query the retrieval stores built from the network state and schema.
    Retrieve {
        query: String,
        #[arg(long, value_enum, default_value = "state")]
        store: StoreArg,
        #[arg(short, long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, value_enum, default_value = "nl")]
        mode: ModeArg,
    },
    /// Re-run a recorded transcript and compare every turn.
    Replay { transcript: PathBuf },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<i32, Failure>;

pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            1
        }
    }
}

fn config(cli: &Cli) -> Result<ServiceConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    if cli.state_dir.is_some() {
        cfg.state_dir.clone_from(&cli.state_dir);
    }
    if cli.schema_dir.is_some() {
        cfg.schema_dir.clone_from(&cli.schema_dir);
    }
    Ok(cfg)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("{}: {e}", path.display())))
}

/// JSON, a bare Python literal, or model output with a fenced block.
pub fn parse_change_set(text: &str) -> Result<ChangeSet, String> {
    if let Ok(v) = serde_json::from_str::<serde_json::Value>(text) {
        return ChangeSet::from_value(v).map_err(|e| e.to_string());
    }
    if text.contains("```") || text.contains("'''") {
        return extract_change_set(text).map_err(|e| e.to_string());
    }
    let v = parse_python_literal(text).map_err(|e| e.to_string())?;
    let v = match v {
        serde_json::Value::Object(_) => serde_json::Value::Array(vec![v]),
        other => other,
    };
    ChangeSet::from_value(v).map_err(|e| e.to_string())
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Outcome {
    let cfg = config(&cli)?;
    match cli.command {
        Command::Serve {
            backend,
            port,
            bind,
            sessions_dir,
        } => {
            let mut cfg = cfg;
            if let Some(b) = backend {
                cfg.backend = b;
            }
            if let Some(p) = port {
                cfg.port = p;
            }
            if let Some(b) = bind {
                cfg.bind = b;
            }
            if sessions_dir.is_some() {
                cfg.sessions_dir = sessions_dir;
            }
            serve(&cfg)
        }
        Command::Eval { spec, out: dir, format } => {
            let mut spec = RunSpec::load(&spec)?;
            if dir.is_some() {
                spec.output_dir = dir;
            }
            let fx = cfg.fixtures()?;
            let ctx = AgentContext {
                backend: Arc::new(MockBackend::new(MockScript::default())?),
                memory: Arc::new(cfg.memory()?),
                schema: Arc::new(fx.schema),
                schema_modules: Arc::new(fx.modules),
            };
            let report = spec.execute(&fx.state, &ctx)?;
            if let Some(d) = &spec.output_dir {
                let formats: Vec<Format> = if format.is_empty() {
                    Format::ALL.to_vec()
                } else {
                    format
                        .iter()
                        .map(|f| match f {
                            FormatArg::Json => Format::Json,
                            FormatArg::Csv => Format::Csv,
                            FormatArg::MarkdownTable => Format::MarkdownTable,
                        })
                        .collect()
                };
                eval::emit_report(&report, &spec.resolve(d), &formats)?;
            }
            write!(out, "{}", eval::markdown_table(&report))?;
            Ok(0)
        }
        Command::Validate { changeset, state } => {
            let fx = cfg.fixtures()?;
            let net = match &state {
                Some(p) => load_state(&fx.schema, p)?,
                None => fx.state,
            };
            let cs = match parse_change_set(&read(&changeset)?) {
                Ok(cs) => cs,
                Err(e) => {
                    writeln!(out, "syntax error: {e}")?;
                    return Ok(1);
                }
            };
            let report = validate_after_apply(&net, &cs, &fx.schema);
            if report.passed() {
                writeln!(out, "pass: {} operations on {} devices", cs.op_count(), cs.0.len())?;
                Ok(0)
            } else {
                write!(out, "{}", report.error_log())?;
                Ok(1)
            }
        }
        Command::Apply {
            changeset,
            state,
            out: dest,
        } => {
            let fx = cfg.fixtures()?;
            let net = match &state {
                Some(p) => load_state(&fx.schema, p)?,
                None => fx.state,
            };
            let cs = parse_change_set(&read(&changeset)?).map_err(Failure)?;
            let next = apply_change_set(&net, &cs, &fx.schema)?;
            let text = next.to_snapshot_json(&fx.schema);
            match dest {
                Some(p) => fs::write(&p, text).map_err(|e| Failure(format!("{}: {e}", p.display())))?,
                None => writeln!(out, "{text}")?,
            }
            Ok(0)
        }
        Command::Retrieve { query, store, k, mode } => {
            let fx = cfg.fixtures()?;
            let memory = cfg.memory()?;
            memory.chunk_and_ingest(&fx.state, &fx.schema, &fx.modules)?;
            let store = match store {
                StoreArg::State => StoreKind::State,
                StoreArg::IrDoc => StoreKind::IrDoc,
            };
            let mode = match mode {
                ModeArg::Nl => Mode::Nl,
                ModeArg::Raw => Mode::Raw,
            };
            for hit in memory.query_top_k(&query, store, k, mode)? {
                writeln!(out, "{:>2}  {:.4}  {}", hit.rank, hit.score, hit.document.doc_id)?;
            }
            Ok(0)
        }
        Command::Replay { transcript } => {
            let fx = cfg.fixtures()?;
            let recorded = read_transcript(&read(&transcript)?)?;
            let ctx = AgentContext {
                backend: Arc::new(MockBackend::new(MockScript::default())?),
                memory: Arc::new(cfg.memory()?),
                schema: Arc::new(fx.schema),
                schema_modules: Arc::new(fx.modules),
            };
            let replayed = replay_session(&recorded, fx.state, cfg.agent.clone(), &ctx)?;
            let mismatches = compare(&recorded, &replayed.turns);
            if mismatches.is_empty() {
                writeln!(out, "replay matches: {} turns", recorded.len())?;
                Ok(0)
            } else {
                for m in &mismatches {
                    writeln!(out, "{m}")?;
                }
                Ok(1)
            }
        }
    }
}

/// Differences in action, actor or payload; timings are ignored.
fn compare(recorded: &[TurnRecord], replayed: &[TurnRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for (a, b) in recorded.iter().zip(replayed) {
        if a.action != b.action || a.actor != b.actor {
            out.push(format!("turn {}: recorded {:?}, replayed {:?}", a.index, a.action, b.action));
        } else if a.payload != b.payload {
            out.push(format!("turn {}: {:?} payload differs", a.index, a.action));
        }
    }
    if recorded.len() != replayed.len() {
        out.push(format!("recorded {} turns, replayed {}", recorded.len(), replayed.len()));
    }
    out
}

fn serve(cfg: &ServiceConfig) -> Outcome {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .try_init()
        .ok();
    let state = Arc::new(AppState::from_config(cfg)?);
    {
        let current = state.state.read().expect("state lock");
        state.memory.chunk_and_ingest(&current, &state.schema, &state.modules)?;
    }
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((cfg.bind.as_str(), cfg.port)).await?;
        tracing::info!("listening on {}", listener.local_addr()?);
        app::serve(state, listener).await
    })?;
    Ok(0)
}
