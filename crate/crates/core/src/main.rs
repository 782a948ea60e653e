use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use ergolab::experiments::{emit_report, experiment_registry, run_experiment, Format};
use ergolab::joinings::{build_joining_value, joining_registry};
use ergolab::system::kinds::registry;
use ergolab::doc::Field;
use ergolab::system::parse_system;
use ergolab::Error;

#[derive(Parser)]
#[command(name = "ergolab", version, about = "Experiments on measure-preserving systems and their joinings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment and write its report.
    Run {
        /// One of: identity-disjoint, example1, product-closure, rank1-family, spectral-probe.
        experiment: String,
        /// JSON config; omitted keys take their defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "ERGOLAB_SEED")]
        seed: u64,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        /// Write a single format instead of all three.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// List the registered experiments.
    List,
    /// Spec documents.
    Spec {
        #[command(subcommand)]
        command: SpecCommand,
    },
}

#[derive(Subcommand)]
enum SpecCommand {
    /// Validate a system or joining document.
    Validate { file: PathBuf },
}

const EXIT_INTERNAL: u8 = 1;
const EXIT_CHECK_FAILED: u8 = 2;
const EXIT_CONFIG: u8 = 3;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_INTERNAL })
}

fn read_json(path: &PathBuf) -> Result<Value, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    serde_json::from_str(&text).map_err(|e| {
        eprintln!("error: {} is not valid JSON: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            experiment,
            config,
            seed,
            out,
            format,
        } => {
            let config = match config {
                Some(p) => match read_json(&p) {
                    Ok(v) => v,
                    Err(code) => return code,
                },
                None => Value::Null,
            };
            let report = match run_experiment(&experiment, &config, seed) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let formats = format.map_or_else(|| Format::ALL.to_vec(), |f| vec![f]);
            match emit_report(&report, &formats, &out) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_INTERNAL);
                }
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("failing checks: {}", report.failing.join(", "));
                ExitCode::from(EXIT_CHECK_FAILED)
            }
        }
        Command::List => {
            let reg = experiment_registry();
            for name in reg.names() {
                println!("{name:<18} {}", reg.get(name).expect("registered").summary());
            }
            ExitCode::SUCCESS
        }
        Command::Spec {
            command: SpecCommand::Validate { file },
        } => {
            let doc = match read_json(&file) {
                Ok(v) => v,
                Err(code) => return code,
            };
            let kind = doc.get("kind").and_then(Value::as_str).unwrap_or_default();
            let joining_only = joining_registry().get(kind).is_some() && registry().get(kind).is_none();
            let outcome = if doc.get("components").is_some() || joining_only {
                build_joining_value(&doc).map(|j| format!("valid joining `{}` on {} coordinates", j.spec.kind, j.dim()))
            } else {
                parse_system(Field::root(&doc, ""), None).map(|s| format!("valid system `{}` on {} coordinates", s.spec().kind, s.dim()))
            };
            match outcome {
                Ok(msg) => {
                    println!("{msg}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(&e),
            }
        }
    }
}
