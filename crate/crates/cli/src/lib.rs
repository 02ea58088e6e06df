//! The `ctdgan` command-line tool.
//!
//! Exit codes: 0 on success, 1 for invalid input or usage, 2 when training or
//! sampling fails at runtime. Runtime failures also leave a JSON diagnostic
//! next to the requested output path.

mod args;
mod commands;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;
use ctdgan::Error;

pub use args::Cli;
use args::{Command, LogLevel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    init_logging(cli.log);
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.into()).build_global();
    }
    let out = output_path(&cli.command);
    match commands::dispatch(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) if e.is_runtime_failure() => {
            eprintln!("error: {e}");
            if let Some(out) = out {
                let path = diagnostic_path(&out);
                match std::fs::write(&path, diagnostic_json(&cli.command, &e)) {
                    Ok(()) => eprintln!("diagnostic written to {}", path.display()),
                    Err(w) => eprintln!("could not write diagnostic {}: {w}", path.display()),
                }
            }
            EXIT_RUNTIME
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

fn init_logging(level: LogLevel) {
    let filter = match level {
        LogLevel::Quiet => log::LevelFilter::Off,
        LogLevel::Info => log::LevelFilter::Info,
        LogLevel::Debug => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .try_init();
}

fn output_path(cmd: &Command) -> Option<PathBuf> {
    match cmd {
        Command::Fit(a) => Some(a.out.clone()),
        Command::Sample(a) => Some(a.out.clone()),
        Command::Balance(a) => Some(a.out.clone()),
        Command::Evaluate(a) => Some(a.out.clone()),
        Command::InferSchema(a) => Some(a.out.clone()),
        Command::Inspect(_) => None,
    }
}

/// `<out>.diagnostic.json`.
pub fn diagnostic_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".diagnostic.json");
    PathBuf::from(s)
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Fit(_) => "fit",
        Command::Sample(_) => "sample",
        Command::Balance(_) => "balance",
        Command::Evaluate(_) => "evaluate",
        Command::Inspect(_) => "inspect",
        Command::InferSchema(_) => "infer-schema",
    }
}

fn diagnostic_json(cmd: &Command, err: &Error) -> String {
    let details = match err {
        Error::NonFiniteLoss {
            epoch,
            batch,
            critic_loss,
            generator_loss,
        } => serde_json::json!({
            "kind": "non_finite_loss",
            "epoch": epoch,
            "batch": batch,
            // non-finite numbers are not valid JSON
            "critic_loss": critic_loss.to_string(),
            "generator_loss": generator_loss.to_string(),
        }),
        Error::AcceptanceStalled {
            requested,
            accepted,
            attempts,
        } => serde_json::json!({
            "kind": "acceptance_stalled",
            "requested": requested,
            "accepted": accepted,
            "attempts": attempts,
        }),
        Error::NonFiniteIntermediate { op } => serde_json::json!({
            "kind": "non_finite_intermediate",
            "op": op,
        }),
        _ => serde_json::json!({ "kind": "other" }),
    };
    let doc = serde_json::json!({
        "command": command_name(cmd),
        "error": err.to_string(),
        "details": details,
    });
    serde_json::to_string_pretty(&doc).expect("json values serialize") + "\n"
}
