use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use soap_core::crypto::registry_lookup;
use soap_core::metrics::{bench_crypto, size_report, MetricsError, MIN_ITERATIONS};
use soap_core::sim::{attack_suite, run_scenario, ScenarioScript, ScriptError, SuiteOptions};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "soap-sim", version, about = "SOAP key establishment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Json,
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario script and report the transcript and verdicts.
    Run {
        scenario: PathBuf,
        #[arg(long, env = "SOAP_SIM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Hex dump every frame (text format).
        #[arg(long)]
        hex: bool,
    },
    /// Encode reference frames for a group and print their sizes.
    Frames {
        #[arg(long, default_value_t = 26)]
        group: u8,
        /// Number of groups listed in the SOAP IE.
        #[arg(long, default_value_t = 1)]
        m: usize,
        /// Sign bare ECDH keys, no session nonce.
        #[arg(long)]
        strict: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = TableFormat::Text)]
        format: TableFormat,
    },
    /// Time the cryptographic operations SOAP adds.
    Bench {
        #[arg(long, default_value_t = 26)]
        group: u8,
        #[arg(long, default_value_t = MIN_ITERATIONS)]
        iterations: usize,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Run the built-in attack scenarios and compare against the expected verdicts.
    AttackSuite {
        /// First of the three seeds each row runs under.
        #[arg(long, env = "SOAP_SIM_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_blacklist: bool,
        #[arg(long)]
        no_mgmt_signing: bool,
        #[arg(long)]
        no_pinning: bool,
        #[arg(long, hide = true)]
        fault_accept_any_signature: bool,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error("unknown group {0}")]
    UnknownGroup(u8),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Exit status of a command that ran to completion.
enum Status {
    Ok,
    Mismatch,
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), CliError> {
    match output {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Write { path: path.to_owned(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn execute(command: Command) -> Result<Status, CliError> {
    match command {
        Command::Run { scenario, seed, output, format, hex } => {
            let text = fs::read_to_string(&scenario).map_err(|source| CliError::Read { path: scenario, source })?;
            let script = ScenarioScript::from_json(&text)?;
            let run = run_scenario(&script, seed)?;
            let t = &run.transcript;
            let body = match format {
                Format::Json => with_newline(t.to_json()),
                Format::Text => t.to_text(hex),
            };
            emit(output.as_deref(), &body)?;
            Ok(if t.expectations_met() { Status::Ok } else { Status::Mismatch })
        }
        Command::Frames { group, m, strict, output, format } => {
            let g = registry_lookup(group).map_err(|_| CliError::UnknownGroup(group))?;
            let report = size_report(g, m, strict)?;
            let body = match format {
                TableFormat::Json => with_newline(report.to_json()),
                TableFormat::Text => report.to_text(true),
                TableFormat::Csv => report.to_csv(),
            };
            emit(output.as_deref(), &body)?;
            Ok(Status::Ok)
        }
        Command::Bench { group, iterations, output, format } => {
            let g = registry_lookup(group).map_err(|_| CliError::UnknownGroup(group))?;
            let report = bench_crypto(g, iterations)?;
            let body = match format {
                Format::Json => with_newline(report.to_json()),
                Format::Text => report.to_text(),
            };
            emit(output.as_deref(), &body)?;
            Ok(Status::Ok)
        }
        Command::AttackSuite {
            seed,
            no_blacklist,
            no_mgmt_signing,
            no_pinning,
            fault_accept_any_signature,
            output,
            format,
        } => {
            let options = SuiteOptions {
                blacklist: !no_blacklist,
                mgmt_signing: !no_mgmt_signing,
                pinning: !no_pinning,
                fault_accept_any_signature,
                ..SuiteOptions::with_seed(seed)
            };
            let report = attack_suite(&options);
            let body = match format {
                Format::Json => with_newline(report.to_json()),
                Format::Text => report.to_text(),
            };
            emit(output.as_deref(), &body)?;
            Ok(if report.all_match() { Status::Ok } else { Status::Mismatch })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Mismatch) => ExitCode::from(1),
        Err(e) => {
            eprintln!("soap-sim: {e}");
            ExitCode::from(2)
        }
    }
}
