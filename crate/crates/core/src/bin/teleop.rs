//! `teleop`: run, serve or join a teleoperation session, replay and export
//! recorded episodes.
//!
//! Exit codes: 0 ok, 1 replay divergence, 2 configuration or file error,
//! 3 connection failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use teleop_core::record::{export_dataset, replay, Episode};
use teleop_core::session::{
    bind, run_connect, run_local, run_serve, ConfigError, Overrides, ServeOptions, SessionConfig, SessionError,
    SessionReport,
};

const BUNDLED_SESSION: &str = include_str!("../../data/sessions/pick_pot.toml");

#[derive(Parser)]
#[command(name = "teleop", version, about = "Whole-body teleoperation sessions")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session (the default)
    Run(RunArgs),
    /// Re-simulate a recorded episode and compare world hashes
    Replay {
        episode: PathBuf,
        /// also write the flat dataset export into this directory
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Write the flat dataset export of an episode
    Export { episode: PathBuf, dir: PathBuf },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Local,
    Serve,
    Connect,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// session file; the bundled pick-pot session when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "local")]
    mode: Mode,
    /// host:port to serve on or connect to; `ws://host:port` connects over WebSocket
    #[arg(long)]
    endpoint: Option<String>,
    /// additional WebSocket listener for browser clients (serve)
    #[arg(long)]
    ws_endpoint: Option<String>,
    /// bundled task name or task file
    #[arg(long)]
    task: Option<String>,
    /// bundled embodiment name or embodiment file
    #[arg(long)]
    embodiment: Option<String>,
    /// write the episode here (local, serve)
    #[arg(long)]
    record: Option<PathBuf>,
    /// injected one-way latency "base_ms,jitter_ms,drop,seed"
    #[arg(long)]
    latency: Option<String>,
    /// ndjson input events to play back (local, connect)
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    ticks_per_second: Option<f64>,
    /// task randomization seed
    #[arg(long)]
    seed: Option<u64>,
    /// also write the session report here
    #[arg(long)]
    report: Option<PathBuf>,
    /// seconds to wait for an operator (serve)
    #[arg(long, default_value_t = 60.0)]
    accept_timeout: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        None => run(&cli.run),
        Some(Command::Run(args)) => run(&args),
        Some(Command::Replay { episode, export }) => replay_cmd(&episode, export.as_deref()),
        Some(Command::Export { episode, dir }) => export_cmd(&episode, &dir),
    };
    ExitCode::from(code)
}

fn load_config(args: &RunArgs) -> Result<SessionConfig, ConfigError> {
    let overrides = Overrides {
        embodiment: args.embodiment.clone(),
        task: args.task.clone(),
        tick_rate: args.ticks_per_second,
        script: args.script.clone(),
        record: args.record.clone(),
        latency: args.latency.clone(),
        endpoint: args.endpoint.clone(),
        ws_endpoint: args.ws_endpoint.clone(),
        seed: args.seed,
    };
    match &args.config {
        Some(path) => SessionConfig::load(path, &overrides),
        None => {
            let mut cfg = SessionConfig::parse(BUNDLED_SESSION, Path::new("."), &overrides)?;
            // the bundled script path is relative to the source tree
            cfg.script = args.script.clone();
            Ok(cfg)
        }
    }
}

fn run(args: &RunArgs) -> u8 {
    let cfg = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let result = match args.mode {
        Mode::Local => run_local(&cfg),
        Mode::Connect => run_connect(&cfg),
        Mode::Serve => bind(&cfg).and_then(|server| {
            if let Ok(addr) = server.local_addr() {
                eprintln!("listening on {addr}");
            }
            if let Some(addr) = server.ws_addr() {
                eprintln!("websocket listening on {addr}");
            }
            let opts = ServeOptions {
                accept_timeout: Duration::from_secs_f64(args.accept_timeout.max(0.0)),
            };
            run_serve(&cfg, &server, opts)
        }),
    };
    match result {
        Ok(report) => finish(&report, args.report.as_deref()),
        Err(e) => {
            eprintln!("error: {e}");
            u8::try_from(SessionError::exit_code(&e)).unwrap_or(2)
        }
    }
}

fn finish(report: &SessionReport, path: Option<&Path>) -> u8 {
    println!("{}", report.to_json());
    if let Some(p) = path {
        if let Err(e) = report.save(p) {
            eprintln!("error: {}: {e}", p.display());
            return 2;
        }
    }
    if report.disconnected {
        eprintln!("error: operator disconnected before the task ended");
        return 3;
    }
    0
}

fn load_episode(path: &Path) -> Result<Episode, u8> {
    Episode::load(path).map_err(|e| {
        eprintln!("error: {e}");
        2
    })
}

fn replay_cmd(path: &Path, export: Option<&Path>) -> u8 {
    let ep = match load_episode(path) {
        Ok(ep) => ep,
        Err(code) => return code,
    };
    let out = match replay(&ep) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let hex = |h: u64| format!("{h:016x}");
    let summary = serde_json::json!({
        "episode": path.display().to_string(),
        "ticks": out.ticks,
        "final_hash": hex(out.final_hash),
        "expected_hash": out.expected_hash.map(hex),
        "matches": out.matches(),
        "success": out.success,
        "first_divergence": out.first_divergence.map(|d| serde_json::json!({
            "tick": d.tick,
            "expected": hex(d.expected),
            "actual": hex(d.actual),
        })),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json value"));
    if let Some(dir) = export {
        if let Err(e) = export_dataset(&ep, dir) {
            eprintln!("error: {e}");
            return 2;
        }
    }
    if out.matches() {
        0
    } else {
        if let Some(d) = out.first_divergence {
            eprintln!("replay diverged at tick {}", d.tick);
        } else {
            eprintln!("replay final hash differs from the recorded footer");
        }
        1
    }
}

fn export_cmd(path: &Path, dir: &Path) -> u8 {
    let ep = match load_episode(path) {
        Ok(ep) => ep,
        Err(code) => return code,
    };
    match export_dataset(&ep, dir) {
        Ok(s) => {
            println!("{} ticks, {} images written to {}", s.ticks, s.images, dir.display());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
