//! `qgauge`: validate models, ingest tool exports, run assessments, report,
//! serve the HTTP API, or replay the bundled demo.

macro_rules! out {
    ($($arg:tt)*) => { $crate::output::emit(&format!($($arg)*)) };
}

macro_rules! outln {
    () => { $crate::output::emit("\n") };
    ($($arg:tt)*) => { $crate::output::emit(&(format!($($arg)*) + "\n")) };
}

mod demo;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use chrono::Utc;
use clap::{Args, Parser, Subcommand};
use qgauge_core::assessment::AssessmentRequest;
use qgauge_core::config::{EngineConfig, DEFAULT_PROJECT};
use qgauge_core::engine::{load_model, Engine, EngineError};
use qgauge_core::ingest::{parse_instant, Format};
use qgauge_core::model::{validate_model, ModelError, QualityModel};
use qgauge_core::records::Window;
use qgauge_core::store::Store;

#[derive(Parser)]
#[command(name = "qgauge", version, about = "Quality model assessment engine")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Config file; its store and model are used when the flags are absent.
    #[arg(long, env = "QGAUGE_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Quality model document.
    #[arg(long, global = true)]
    model: Option<PathBuf>,
    /// Store directory.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Trailing assessment window in days, overriding each metric's own.
    #[arg(long, global = true)]
    window_days: Option<u32>,
    /// Print JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model document and list its violations.
    Validate,
    /// Parse a tool export and append its records to the store.
    Ingest {
        /// testxml, commits, static, issues, logs or records.
        format: Format,
        input: PathBuf,
        /// Build id for test reports that do not name one.
        #[arg(long)]
        build_id: Option<String>,
    },
    /// Run one assessment and store the snapshot.
    Assess {
        /// Window start (inclusive); needs --to.
        #[arg(long, requires = "to")]
        from: Option<String>,
        /// Window end (exclusive); needs --from.
        #[arg(long, requires = "from")]
        to: Option<String>,
    },
    /// Print the latest snapshot, or one element's history.
    Report {
        #[arg(long)]
        element: Option<String>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
    /// Copy the bundled two-window data set into a directory, ingest and
    /// assess it, and explain the resulting alerts.
    Demo {
        #[arg(default_value = "qgauge-demo")]
        target: PathBuf,
    },
}

/// Input that failed validation; exits with 2.
#[derive(Debug)]
struct Invalid(String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

fn exit_code(err: &anyhow::Error) -> u8 {
    let invalid = err.chain().any(|e| {
        e.is::<Invalid>()
            || matches!(e.downcast_ref::<EngineError>(), Some(EngineError::InvalidModel(_) | EngineError::Model(_)))
            || e.is::<ModelError>()
    });
    if invalid {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

struct Settings {
    global: Global,
    config: Option<EngineConfig>,
}

impl Settings {
    fn new(global: Global) -> Result<Settings> {
        let config = match &global.config {
            Some(p) => Some(EngineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?),
            None => None,
        };
        Ok(Settings { global, config })
    }

    fn model_path(&self) -> Result<PathBuf> {
        self.global
            .model
            .clone()
            .or_else(|| self.config.as_ref().map(|c| c.model.clone()))
            .ok_or_else(|| anyhow!("no model: pass --model or set QGAUGE_CONFIG"))
    }

    fn store_path(&self) -> Result<PathBuf> {
        self.global
            .store
            .clone()
            .or_else(|| self.config.as_ref().map(|c| c.store.clone()))
            .ok_or_else(|| anyhow!("no store: pass --store or set QGAUGE_CONFIG"))
    }

    fn project(&self) -> String {
        self.config
            .as_ref()
            .map(|c| c.project.clone())
            .unwrap_or_else(|| DEFAULT_PROJECT.to_string())
    }

    fn window_days(&self) -> Option<u32> {
        self.global.window_days.or(self.config.as_ref().and_then(|c| c.window_days))
    }

    fn engine(&self) -> Result<Engine> {
        let model = self.model()?;
        let store = Store::open(self.store_path()?, &self.project())?;
        Ok(Engine::new(model, store, self.project())?)
    }

    /// Loads and validates the model.
    fn model(&self) -> Result<QualityModel> {
        let path = self.model_path()?;
        let model = load_model(&path)?;
        let violations = validate_model(&model);
        if !violations.is_empty() {
            return Err(Invalid(output::violations(&path, &violations)).into());
        }
        Ok(model)
    }
}

fn run(cli: Cli) -> Result<()> {
    let settings = Settings::new(cli.global)?;
    let json = settings.global.json;
    match cli.command {
        Command::Validate => validate(&settings),
        Command::Ingest { format, input, build_id } => {
            let text = read_input(&input)?;
            let store = settings.store_path()?;
            let mut store = Store::open(&store, &settings.project())
                .with_context(|| format!("opening store {}", store.display()))?;
            let mut ctx = qgauge_core::ingest::IngestContext::new(settings.project(), Utc::now());
            ctx.build_id = build_id;
            let parsed = qgauge_core::ingest::parse(format, &text, &ctx)
                .with_context(|| format!("parsing {}", input.display()))?;
            let outcome = store.append(parsed.records)?;
            let report = qgauge_core::engine::IngestReport {
                inserted: outcome.inserted,
                duplicates: outcome.duplicates,
                warnings: parsed.warnings,
            };
            if json {
                outln!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                out!("{}", output::ingest_report(&report));
            }
            Ok(())
        }
        Command::Assess { from, to } => {
            let engine = settings.engine()?;
            let now = Utc::now();
            let req = match (from, to) {
                (Some(f), Some(t)) => AssessmentRequest::explicit(Window::new(instant(&f)?, instant(&t)?), now),
                _ => AssessmentRequest::trailing(settings.window_days(), now),
            };
            let out = engine.assess(&req)?;
            if json {
                outln!("{}", serde_json::to_string_pretty(&out)?);
            } else {
                out!("{}", output::snapshot_table(Some(&out.snapshot), &engine.model(), false));
                for a in &out.alerts {
                    outln!("{}", output::alert_line(a));
                }
            }
            Ok(())
        }
        Command::Report { element } => report(&settings, element.as_deref()),
        Command::Serve { port } => serve(&settings, port),
        Command::Demo { target } => demo::run(&target, json),
    }
}

fn read_input(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn instant(s: &str) -> Result<chrono::DateTime<Utc>> {
    parse_instant(s).ok_or_else(|| Invalid(format!("cannot read {s:?} as a timestamp")).into())
}

fn validate(settings: &Settings) -> Result<()> {
    let path = settings.model_path()?;
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let model = qgauge_core::model::parse_model(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())))?;
    let violations = validate_model(&model);
    if settings.global.json {
        outln!("{}", serde_json::to_string_pretty(&violations)?);
    }
    if violations.is_empty() {
        if !settings.global.json {
            outln!("model valid: {} aspects, {} factors, {} metrics", model.aspects.len(), model.factors.len(), model.metrics.len());
        }
        Ok(())
    } else {
        Err(Invalid(output::violations(&path, &violations)).into())
    }
}

fn report(settings: &Settings, element: Option<&str>) -> Result<()> {
    let store = Store::open_read_only(settings.store_path()?)?;
    // the model is optional here: it only fixes the row set and order
    let model = match settings.model_path() {
        Ok(_) => Some(settings.model()?),
        Err(_) => None,
    };
    match element {
        Some(id) => {
            let series = store.element_series(id, &Window::all_time());
            if series.is_empty() && model.as_ref().is_some_and(|m| m.stratum_of(id).is_none()) {
                return Err(Invalid(format!("unknown element {id}")).into());
            }
            if settings.global.json {
                outln!("{}", serde_json::to_string_pretty(&series)?);
            } else {
                out!("{}", output::series_table(id, &series));
            }
        }
        None => {
            let latest = store.latest_snapshot();
            if settings.global.json {
                outln!("{}", serde_json::to_string_pretty(&latest)?);
            } else {
                match &model {
                    Some(m) => out!("{}", output::snapshot_table(latest, m, true)),
                    None => out!("{}", output::snapshot_entries(latest)),
                }
            }
        }
    }
    Ok(())
}

fn serve(settings: &Settings, port: Option<u16>) -> Result<()> {
    let mut config = match &settings.config {
        Some(c) => c.clone(),
        None => EngineConfig::new(settings.store_path()?, settings.model_path()?),
    };
    if let Some(m) = &settings.global.model {
        config.model = m.clone();
    }
    if let Some(s) = &settings.global.store {
        config.store = s.clone();
    }
    config.port = port.unwrap_or(config.port);
    config.window_days = settings.window_days();
    // validate up front so a broken model exits 2 with the full report
    settings.model()?;
    let runtime = tokio::runtime::Runtime::new()?;
    eprintln!("serving on http://127.0.0.1:{}", config.port);
    runtime.block_on(qgauge_server::serve(config))?;
    Ok(())
}
