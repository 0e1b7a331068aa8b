//! `uqsched`: ingest execution logs, quantify per-operator duration
//! uncertainty, rank operators, train error predictors and serve the API.

mod config;
mod export;
mod render;

use std::fmt;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use uqsched_core::ingest::parse_csv_file;
use uqsched_core::{
    analyze, list_sequences, load_snapshot, save_snapshot, train, Analysis, GroupKey, PredictorSet, Season,
    Snapshot,
};
use uqsched_service::{AppState, CorsPolicy, ServiceState, TrainReport, DEFAULT_QUANTILES};

use crate::config::{CliConfig, Overrides};

#[derive(Parser, Debug)]
#[command(name = "uqsched", version, about)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "UQSCHED_CONFIG", value_name = "FILE")]
    config: Option<PathBuf>,

    /// Machine-readable output (same payloads as the HTTP API).
    #[arg(long, global = true)]
    json: bool,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Debug)]
struct Data {
    /// Snapshot JSON written by `ingest`.
    #[arg(long, value_name = "FILE")]
    snapshot: Option<PathBuf>,
    /// Predictor JSON written by `train`; without it corrections are the identity.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Group {
    #[arg(long)]
    sequence: String,
    #[arg(long)]
    operator: String,
    #[arg(long)]
    season: Season,
}

impl Group {
    fn key(&self) -> GroupKey {
        GroupKey::new(self.sequence.clone(), self.operator.clone(), self.season)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse an execution-log CSV into a snapshot.
    Ingest {
        #[arg(long, value_name = "CSV")]
        input: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Creation time recorded in the snapshot.
        #[arg(long, value_name = "RFC3339")]
        created_at: Option<DateTime<Utc>>,
    },
    /// List sequences with their seasons, operators and record counts.
    Sequences {
        #[command(flatten)]
        data: Data,
    },
    /// Quantify every group and write the models and rankings.
    Analyze {
        #[command(flatten)]
        data: Data,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Rank operators on a sequence and season.
    Rank {
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        sequence: String,
        #[arg(long)]
        season: Season,
    },
    /// Corrected estimate and duration band for one assignment.
    Whatif {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        group: Group,
        /// Nominal duration in seconds.
        #[arg(long)]
        estimate: f64,
        #[arg(long, default_value_t = DEFAULT_QUANTILES.0)]
        qlo: f64,
        #[arg(long, default_value_t = DEFAULT_QUANTILES.1)]
        qhi: f64,
    },
    /// Fit error predictors and compare degrees before and after correction.
    Train {
        #[arg(long, value_name = "FILE")]
        snapshot: Option<PathBuf>,
        /// Where to write the fitted predictors.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API.
    Serve {
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Allowed browser origin; repeatable, `*` for any.
        #[arg(long = "cors-origin", value_name = "ORIGIN")]
        cors_origins: Vec<String>,
    },
    /// Export one group's band as CSV or JSON.
    ExportPbox {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        group: Group,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

/// A failed command and its exit status.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<uqsched_core::Error> for Failure {
    fn from(e: uqsched_core::Error) -> Self {
        let code = match e {
            uqsched_core::Error::NotFound(_) => 1,
            _ => 2,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

struct Ctx {
    config: CliConfig,
    json: bool,
    out: Vec<u8>,
}

impl Ctx {
    fn snapshot_path(&self, flag: &Option<PathBuf>) -> Result<PathBuf, Failure> {
        flag.clone()
            .or_else(|| self.config.paths.snapshot.clone())
            .ok_or_else(|| Failure::usage("no snapshot given (use --snapshot or paths.snapshot)"))
    }

    fn snapshot(&self, flag: &Option<PathBuf>) -> Result<Snapshot, Failure> {
        let path = self.snapshot_path(flag)?;
        load_snapshot(&path).map_err(|e| with_path(e, &path))
    }

    fn predictors(&self, flag: &Option<PathBuf>) -> Result<PredictorSet, Failure> {
        match flag.clone().or_else(|| self.config.paths.model.clone()) {
            None => Ok(PredictorSet::untrained(self.config.predictor.clone())),
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Failure::usage(format!("{}: invalid model: {e}", path.display())))
            }
        }
    }

    fn load(&self, data: &Data) -> Result<(Snapshot, Analysis, PredictorSet), Failure> {
        let snapshot = self.snapshot(&data.snapshot)?;
        let analysis = analyze(&snapshot, &self.config.analysis)?;
        Ok((snapshot, analysis, self.predictors(&data.model)?))
    }

    fn emit_json<T: Serialize>(&mut self, value: &T) {
        serde_json::to_writer(&mut self.out, value).expect("payload serializes");
        self.out.push(b'\n');
    }

    fn text(&mut self, s: &str) {
        self.out.extend_from_slice(s.as_bytes());
    }
}

fn with_path(e: uqsched_core::Error, path: &Path) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, contents).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("payload serializes");
    v.push(b'\n');
    v
}

fn run(cli: Cli) -> Result<Vec<u8>, Failure> {
    let mut config = CliConfig::load(cli.config.as_deref())?;
    config.apply(&cli.overrides);
    config.validate()?;
    let mut ctx = Ctx {
        config,
        json: cli.json,
        out: Vec::new(),
    };
    if cli.print_config {
        let text = ctx.config.to_toml();
        ctx.text(&text);
        return Ok(ctx.out);
    }
    let Some(command) = cli.command else {
        return Err(Failure::usage("no command given; see --help"));
    };
    match command {
        Command::Ingest {
            input,
            out,
            created_at,
        } => {
            let mut snapshot = parse_csv_file(&input).map_err(|e| with_path(e, &input))?;
            if let Some(at) = created_at {
                snapshot = snapshot.with_created_at(at);
            }
            save_snapshot(&snapshot, &out).map_err(|e| with_path(e, &out))?;
            for r in &snapshot.rejects {
                eprintln!("line {}: {} {}", r.line, r.reason, r.detail);
            }
            if ctx.json {
                ctx.emit_json(&serde_json::json!({
                    "records": snapshot.records.len(),
                    "rejects": snapshot.rejects.len(),
                }));
            } else {
                ctx.text(&format!(
                    "{}, {}\n",
                    render::plural(snapshot.records.len(), "record"),
                    render::plural(snapshot.rejects.len(), "reject")
                ));
            }
        }
        Command::Sequences { data } => {
            let snapshot = ctx.snapshot(&data.snapshot)?;
            let list = list_sequences(&snapshot);
            if ctx.json {
                ctx.emit_json(&list);
            } else {
                let t = render::sequences(&list);
                ctx.text(&t);
            }
        }
        Command::Analyze { data, out } => {
            let (_, analysis, predictors) = ctx.load(&data)?;
            let export = analysis.export(&predictors)?;
            match out {
                Some(path) => {
                    write_file(&path, &pretty(&export))?;
                    if ctx.json {
                        ctx.emit_json(&export.models);
                    } else {
                        let t = render::models(&export.models);
                        ctx.text(&t);
                    }
                }
                None if ctx.json => ctx.emit_json(&export),
                None => ctx.out.extend(pretty(&export)),
            }
        }
        Command::Rank {
            data,
            sequence,
            season,
        } => {
            let (_, analysis, predictors) = ctx.load(&data)?;
            let ranking = analysis.ranking(&sequence, season, &predictors)?;
            if ctx.json {
                ctx.emit_json(&ranking);
            } else {
                let t = render::ranking(&ranking);
                ctx.text(&t);
            }
        }
        Command::Whatif {
            data,
            group,
            estimate,
            qlo,
            qhi,
        } => {
            if !(estimate.is_finite() && estimate > 0.0) {
                return Err(Failure::usage(format!(
                    "--estimate must be positive, got {estimate}"
                )));
            }
            let (_, analysis, predictors) = ctx.load(&data)?;
            let w = analysis.what_if(&group.key(), estimate, &predictors, (qlo, qhi))?;
            if ctx.json {
                ctx.emit_json(&w);
            } else {
                let t = render::what_if(&group.key(), estimate, &w, (qlo, qhi));
                ctx.text(&t);
            }
        }
        Command::Train { snapshot, out } => {
            let snap = ctx.snapshot(&snapshot)?;
            let outcome = train(&snap, &ctx.config.analysis, &ctx.config.predictor)?;
            if let Some(path) = out.or_else(|| ctx.config.paths.model.clone()) {
                write_file(&path, &pretty(&outcome.predictors))?;
            }
            let report = TrainReport {
                groups: outcome.comparison,
            };
            if ctx.json {
                ctx.emit_json(&report);
            } else {
                let t = render::comparison(&report.groups);
                ctx.text(&t);
            }
        }
        Command::Serve {
            data,
            host,
            port,
            cors_origins,
        } => {
            let snapshot = ctx.snapshot(&data.snapshot)?;
            let predictors = ctx.predictors(&data.model)?;
            let state = ServiceState::new(
                snapshot,
                &ctx.config.analysis,
                predictors,
                ctx.config.predictor.clone(),
            )?;
            let cors = if cors_origins.iter().any(|o| o == "*") {
                CorsPolicy::Any
            } else if cors_origins.is_empty() {
                CorsPolicy::Disabled
            } else {
                CorsPolicy::Origins(cors_origins)
            };
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env()
                        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
                )
                .with_writer(std::io::stderr)
                .init();
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(uqsched_service::serve(
                SocketAddr::new(host, port),
                AppState::new(state),
                &cors,
            ))?;
        }
        Command::ExportPbox {
            data,
            group,
            format,
            out,
        } => {
            let snapshot = ctx.snapshot(&data.snapshot)?;
            let analysis = analyze(&snapshot, &ctx.config.analysis)?;
            let key = group.key();
            let model = analysis
                .model(&key)
                .ok_or_else(|| Failure::from(uqsched_core::Error::NotFound(format!("group {key}"))))?;
            let bytes = match format {
                Format::Csv => export::pbox_csv(&model.band).into_bytes(),
                Format::Json => {
                    let mut v = serde_json::to_vec(model).expect("payload serializes");
                    v.push(b'\n');
                    v
                }
            };
            match out {
                Some(path) => write_file(&path, &bytes)?,
                None => ctx.out.extend(bytes),
            }
        }
    }
    Ok(ctx.out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(&out).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
