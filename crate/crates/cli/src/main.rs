//! `servdial`: serve, evaluate, inspect and generate service-grounded
//! dialogue data from the command line.
//!
//! Exit codes: 0 ok, 1 violations found (or a request the gateway could not
//! serve), 2 usage, 3 I/O or data errors, 4 model adapter unreachable.

mod config;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use servdial_core::dataset::{self, qc_all, stats, synth_generate, SynthKnobs};
use servdial_core::gateway::poi::haversine_km;
use servdial_core::generation::{GenerationError, GeneratorBinding};
use servdial_core::metrics::{
    echo_outputs, evaluate_split, examples_from_sessions, system_outputs, MetricReport, ReportSplit,
};
use servdial_core::types::{parse_time, Role, ServiceRequest, SpatiotemporalState, Split, TopicPath};
use servdial_core::Execution;
use servdial_server::{CreateSession, Engine, EngineConfig, EngineError, LocationSpec, Mode, SessionStore, Viewer};
use thiserror::Error;

use config::{CliConfig, Overrides};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("model adapter unreachable: {0}")]
    Adapter(String),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Adapter(_) => 4,
        }
    }
}

impl From<GenerationError> for CliError {
    fn from(e: GenerationError) -> Self {
        match e {
            GenerationError::AdapterUnreachable(m) => CliError::Adapter(m),
            GenerationError::Gateway(g) => CliError::Failed(g.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Generation(g) => g.into(),
            EngineError::Storage(m) => CliError::Io(m),
            other => CliError::Failed(other.to_string()),
        }
    }
}

impl From<dataset::DatasetError> for CliError {
    fn from(e: dataset::DatasetError) -> Self {
        match e {
            dataset::DatasetError::InfeasibleKnobs(m) => CliError::Usage(format!("infeasible knobs: {m}")),
            dataset::DatasetError::UnknownHoldout(t) => CliError::Usage(format!("unknown holdout topic {t:?}")),
            other => CliError::Io(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "servdial", version, about = "Service-grounded dialogue toolkit")]
struct Cli {
    /// Print machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum System {
    Baseline,
    Adapter,
    /// Replays the gold annotation; every metric is 1.0
    Echo,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP session service
    Serve {
        /// Address to bind [default: 127.0.0.1:8080 or the config's bind]
        #[arg(long)]
        bind: Option<String>,
        /// Event log path [default: sessions.events.jsonl or the config's log]
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Automatic metrics of a system on a dataset
    Eval {
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "baseline")]
        system: System,
        /// Only evaluate sessions of this split (seen, unseen, valid, train, live)
        #[arg(long)]
        split: Option<String>,
        /// Request token log-probabilities and report perplexity
        #[arg(long)]
        logprobs: bool,
        /// Also write the reports as JSON to this file
        #[arg(long)]
        out: Option<PathBuf>,
        /// Score examples one at a time
        #[arg(long)]
        sequential: bool,
    },
    /// Corpus statistics
    Stats { dataset: PathBuf },
    /// Quality-control check; exits 1 when any session violates a rule
    Validate { dataset: PathBuf },
    /// Generate a synthetic corpus
    Synth {
        /// Number of sessions
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        bot_turns: usize,
        #[arg(long, default_value_t = 0.523)]
        knowledge_ratio: f64,
        #[arg(long, default_value_t = 6.35)]
        query_mean: f64,
        #[arg(long, default_value_t = 0.5)]
        other_service: f64,
        /// Level-1,level-2,level-3 topic pool sizes
        #[arg(long, default_value = "12,20,40", value_parser = parse_pool)]
        topics: [usize; 3],
        #[arg(long, default_value_t = 16)]
        locations: usize,
        /// Split tag for every generated session [default: from the file name, else train]
        #[arg(long)]
        split: Option<String>,
    },
    /// Send one request through the service gateway
    Gateway {
        query: String,
        #[arg(long, allow_hyphen_values = true)]
        lat: f64,
        #[arg(long, allow_hyphen_values = true)]
        lon: f64,
        /// ISO 8601 time with offset, e.g. 2022-08-12T15:00+08:00
        #[arg(long)]
        time: String,
        /// Location name [default: nearest pool location]
        #[arg(long)]
        name: Option<String>,
    },
    /// Chat with the BOT in the terminal; `/rate N` ends the session
    Chat {
        /// Topic path, e.g. travel/outing or travel/outing/suburbs
        #[arg(long, default_value = "life/chat")]
        topic: String,
        /// Save the transcript as a one-session dataset file
        #[arg(long)]
        out: Option<PathBuf>,
        /// Session time, ISO 8601 with offset [default: now in UTC+8]
        #[arg(long)]
        time: Option<String>,
        /// Location name from the location pool [default: drawn at random]
        #[arg(long)]
        location: Option<String>,
    },
}

struct ChatOptions {
    topic: TopicPath,
    out: Option<PathBuf>,
    time: Option<String>,
    location: Option<String>,
    json: bool,
}

fn parse_pool(s: &str) -> Result<[usize; 3], String> {
    let v: Vec<usize> =
        s.split(',').map(|p| p.trim().parse().map_err(|_| format!("bad pool size {p:?}"))).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| "expected three comma-separated sizes".to_string())
}

fn parse_topic(s: &str) -> Result<TopicPath, CliError> {
    let parts: Vec<&str> = s.split('/').collect();
    let l1 = parts[0].parse().map_err(|e: servdial_core::types::ModelError| CliError::Usage(e.to_string()))?;
    let topic = match parts.as_slice() {
        [_, l2] => TopicPath::new(l1, *l2, None),
        [_, l2, l3] => TopicPath::new(l1, *l2, Some(l3.to_string())),
        _ => return Err(CliError::Usage("topic needs 2 or 3 levels separated by '/'".into())),
    };
    topic.map_err(|e| CliError::Usage(e.to_string()))
}

fn emit(json_out: bool, value: &impl Serialize, text: impl FnOnce() -> String) {
    if json_out {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
    } else {
        print!("{}", text());
    }
}

fn load(path: &std::path::Path) -> Result<Vec<servdial_core::Session>, CliError> {
    Ok(dataset::load(path)?)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let cfg = CliConfig::resolve(&cli.overrides)?;
    let json_out = cli.json;
    match cli.command {
        Command::Serve { bind, log } => {
            let log = log.unwrap_or_else(|| cfg.log.clone());
            let bind = bind.unwrap_or_else(|| cfg.bind.clone());
            let store = SessionStore::open(&log)?;
            let engine = Arc::new(Engine::new(store, engine_config(&cfg)?));
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            eprintln!("serving on http://{bind} (log {})", log.display());
            rt.block_on(servdial_server::serve(engine, &bind)).map_err(|e| CliError::Io(e.to_string()))?;
            Ok(0)
        }
        Command::Eval { dataset, system, split, logprobs, out, sequential } => {
            let sessions = load(&dataset)?;
            let wanted = split.map(|s| parse_report_split(&s)).transpose()?;
            let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
            let binding = match system {
                System::Baseline => Some(GeneratorBinding::baseline()),
                System::Adapter => match cfg.binding() {
                    b if cfg.adapter_url.is_some() => Some(b),
                    _ => return Err(CliError::Usage("--system adapter needs --adapter-url".into())),
                },
                System::Echo => None,
            };
            let mut groups: BTreeMap<String, (ReportSplit, Vec<servdial_core::Session>)> = BTreeMap::new();
            for s in sessions {
                let rs = ReportSplit::from(s.split);
                if wanted.is_none_or(|w| w == rs) {
                    groups.entry(rs.to_string()).or_insert_with(|| (rs, Vec::new())).1.push(s);
                }
            }
            if groups.is_empty() {
                return Err(CliError::Usage("no sessions in the requested split".into()));
            }
            let mut reports = Vec::new();
            for (_, (rs, group)) in groups {
                let examples = examples_from_sessions(&group);
                let outputs = match &binding {
                    None => echo_outputs(&examples),
                    Some(b) => {
                        let opts = servdial_core::generation::GenerationOptions {
                            want_logprobs: logprobs,
                            ..cfg.generation()
                        };
                        system_outputs(&examples, b, opts, exec)?
                    }
                };
                reports.push(evaluate_split(&examples, &outputs, rs, exec).map_err(|e| CliError::Io(e.to_string()))?);
            }
            if let Some(path) = out {
                let body = serde_json::to_string_pretty(&reports).expect("serializable");
                std::fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            }
            emit(json_out, &reports, || MetricReport::render_table(&reports));
            Ok(0)
        }
        Command::Stats { dataset } => {
            let table = stats(&load(&dataset)?)?;
            emit(json_out, &table, || table.render());
            Ok(0)
        }
        Command::Validate { dataset } => {
            let sessions = load(&dataset)?;
            let reports = qc_all(&sessions, &cfg.qc(), Execution::Parallel);
            let failing: Vec<_> = reports.iter().filter(|r| !r.passes()).collect();
            let summary = json!({
                "sessions": reports.len(),
                "failing": failing.len(),
                "violations": failing,
            });
            emit(json_out, &summary, || {
                let mut out = String::new();
                for r in &failing {
                    for v in &r.violations {
                        out.push_str(&format!(
                            "{}\t{}\t{}\n",
                            r.session_id,
                            v.code(),
                            serde_json::to_string(v).expect("serializable")
                        ));
                    }
                }
                out.push_str(&format!("{} sessions, {} with violations\n", reports.len(), failing.len()));
                out
            });
            Ok(u8::from(!failing.is_empty()))
        }
        Command::Synth { n, out, bot_turns, knowledge_ratio, query_mean, other_service, topics, locations, split } => {
            let knobs = SynthKnobs {
                bot_turns_per_session: bot_turns,
                knowledge_ratio,
                query_chars_mean: query_mean,
                other_service_mean: other_service,
                topic_pool: topics,
                location_pool: locations,
                copy_threshold: cfg.copy_threshold,
                split: match split {
                    Some(s) => s.parse::<Split>().map_err(CliError::Usage)?,
                    None => dataset::io::split_from_file_name(&out).unwrap_or(Split::Train),
                },
            };
            let sessions = synth_generate(cfg.seed, n, &knobs)?;
            dataset::save(&sessions, &out)?;
            let table = stats(&sessions)?;
            emit(json_out, &json!({ "path": out, "sessions": sessions.len(), "stats": table }), || {
                format!("wrote {} sessions to {}\n{}", sessions.len(), out.display(), table.render())
            });
            Ok(0)
        }
        Command::Gateway { query, lat, lon, time, name } => {
            let gateway = cfg.gateway()?;
            let time = parse_time(&time).map_err(|e| CliError::Usage(e.to_string()))?;
            let name = match name {
                Some(n) => n,
                None => nearest_location(&gateway, lat, lon)
                    .ok_or_else(|| CliError::Usage("--name is required without a location pool".into()))?,
            };
            let state =
                SpatiotemporalState::try_new(time, lat, lon, name).map_err(|e| CliError::Usage(e.to_string()))?;
            let request = ServiceRequest::new(query, state).map_err(|e| CliError::Usage(e.to_string()))?;
            match gateway.dispatch(&request) {
                Ok(k) => {
                    emit(json_out, &k, || format!("[{}] {}\n", k.skill, k.text));
                    Ok(0)
                }
                Err(e) => {
                    emit(json_out, &json!({ "error": e.code(), "detail": e.to_string() }), || format!("error: {e}\n"));
                    Ok(1)
                }
            }
        }
        Command::Chat { topic, out, time, location } => {
            chat(&cfg, ChatOptions { topic: parse_topic(&topic)?, out, time, location, json: json_out })
        }
    }
}

fn parse_report_split(s: &str) -> Result<ReportSplit, CliError> {
    serde_json::from_value(json!(s))
        .or_else(|_| s.parse::<Split>().map(ReportSplit::from))
        .map_err(|_| CliError::Usage(format!("unknown split {s:?}")))
}

fn nearest_location(gateway: &servdial_core::Gateway, lat: f64, lon: f64) -> Option<String> {
    let store = gateway.snapshot();
    store
        .locations
        .iter()
        .min_by(|a, b| {
            haversine_km(lat, lon, a.latitude, a.longitude).total_cmp(&haversine_km(lat, lon, b.latitude, b.longitude))
        })
        .map(|l| l.name.clone())
}

fn engine_config(cfg: &CliConfig) -> Result<EngineConfig, CliError> {
    let gateway = cfg.shared_gateway()?;
    let locations = gateway.snapshot().locations.clone();
    Ok(EngineConfig {
        gateway,
        binding: cfg.binding(),
        qc: cfg.qc(),
        generation: cfg.generation(),
        locations,
        seed: cfg.seed,
    })
}

fn chat(cfg: &CliConfig, opts: ChatOptions) -> Result<u8, CliError> {
    let engine = Engine::new(SessionStore::in_memory(), engine_config(cfg)?);
    let location = match &opts.location {
        None => None,
        Some(name) => {
            let loc = engine.config().locations.iter().find(|l| &l.name == name);
            let loc = loc.ok_or_else(|| CliError::Usage(format!("unknown location {name:?}")))?;
            Some(LocationSpec { name: loc.name.clone(), lat: loc.latitude, lon: loc.longitude })
        }
    };
    let request =
        CreateSession { id: Some("chat".into()), topic: opts.topic, location, time: opts.time, mode: Mode::Live };
    let view = engine.create_session(request).map_err(|e| match e {
        EngineError::InvalidRequest(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    eprintln!(
        "location: {} | time: {} | /rate N finishes, /retry repeats a failed BOT turn, /quit exits",
        view.session["location"]["name"], view.session["time"]
    );
    let mut stdout = std::io::stdout();
    for line in std::io::stdin().lock().lines() {
        let line = line.map_err(|e| CliError::Io(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(score) = line.strip_prefix("/rate") {
            let score = score.trim().parse().map_err(|_| CliError::Usage("usage: /rate 0-5".into()))?;
            engine.rate_session("chat", score)?;
            break;
        }
        if line == "/quit" {
            break;
        }
        let waiting = engine.get("chat", Viewer::Bot)?.next_role == Role::Bot;
        match (line == "/retry", waiting) {
            (false, false) => {
                engine.post_user_message("chat", line)?;
            }
            (true, true) => {}
            (false, true) => {
                eprintln!("the last BOT turn failed; type /retry or /quit");
                continue;
            }
            (true, false) => {
                eprintln!("nothing to retry");
                continue;
            }
        }
        match engine.run_bot_turn("chat") {
            Ok(turn) => {
                let shown = if opts.json {
                    serde_json::to_string(&turn).expect("serializable")
                } else {
                    format!("{}: {}", Role::Bot, turn.turn.text())
                };
                writeln!(stdout, "{shown}").map_err(|e| CliError::Io(e.to_string()))?;
            }
            Err(e @ (EngineError::Gateway(_) | EngineError::Generation(_))) => {
                eprintln!("BOT turn failed: {e}; type /retry or /quit");
            }
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(path) = opts.out {
        let session = engine.with_store(|s| s.get("chat").map(|e| e.session.clone())).expect("chat session exists");
        dataset::save(&[session], &path)?;
        eprintln!("saved transcript to {}", path.display());
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json_out = cli.json;
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            if json_out {
                println!("{}", json!({ "error": e.exit_code(), "detail": e.to_string() }));
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
