//! Command-line frontend: family analysis, protocol runs, verification
//! suites and the Clifford separable-measurement reports.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CmdError, RunMode, RunOptions, Suite};

#[derive(Parser)]
#[command(
    name = "blindgate",
    version,
    about = "Construct, simulate and verify communication-optimal blind quantum gate protocols"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a gate family: preserved rows, basis, dual basis, cost.
    Analyze {
        family: PathBuf,
        /// Output path; `-` streams to stdout.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run one protocol instance and emit its transcript.
    Run {
        family: PathBuf,
        #[arg(long, value_enum)]
        mode: RunMode,
        /// Gate choice d (index into the family).
        #[arg(long)]
        choice: usize,
        /// Parameter value for parametrized gates.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Input state: zero | random | file:PATH | entref.
        #[arg(long, default_value = "zero")]
        psi: String,
        /// Comma-separated forced measurement outcomes.
        #[arg(long)]
        force_outcomes: Option<String>,
        #[arg(long)]
        out: Option<String>,
    },
    /// Run a verification suite.
    Verify {
        family: PathBuf,
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Clifford-family reports: separable measurement construction and the
    /// free-gate enumeration.
    Clifford {
        family: PathBuf,
        #[arg(long)]
        separable: bool,
        #[arg(long)]
        enumerate: bool,
        #[arg(long)]
        out: Option<String>,
    },
}

fn dispatch(cli: Cli) -> Result<(String, bool, Option<String>, String), CmdError> {
    match cli.command {
        Command::Analyze { family, out } => {
            let (body, pass) = commands::cmd_analyze(&family)?;
            let name = format!("{}.analyze.json", stem(&family));
            Ok((body, pass, out, name))
        }
        Command::Run {
            family,
            mode,
            choice,
            theta,
            seed,
            psi,
            force_outcomes,
            out,
        } => {
            let forced = match force_outcomes {
                None => Vec::new(),
                Some(csv) => csv
                    .split(',')
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.trim().parse::<u64>().map_err(|e| {
                            CmdError::Config(format!("bad --force-outcomes entry {s:?}: {e}"))
                        })
                    })
                    .collect::<Result<_, _>>()?,
            };
            let opts = RunOptions {
                mode,
                choice,
                theta,
                seed,
                psi,
                force_outcomes: forced,
            };
            let (body, pass) = commands::cmd_run(&family, &opts)?;
            let name = format!("{}.run.json", stem(&family));
            Ok((body, pass, out, name))
        }
        Command::Verify {
            family,
            suite,
            seed,
            out,
        } => {
            let (body, pass) = commands::cmd_verify(&family, suite, seed)?;
            let name = format!("{}.verify.json", stem(&family));
            Ok((body, pass, out, name))
        }
        Command::Clifford {
            family,
            separable,
            enumerate,
            out,
        } => {
            let (body, pass) = commands::cmd_clifford(&family, separable, enumerate)?;
            let name = format!("{}.clifford.json", stem(&family));
            Ok((body, pass, out, name))
        }
    }
}

fn stem(path: &std::path::Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "family".into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok((body, pass, out, default_name)) => {
            match commands::write_report(out.as_deref(), &default_name, &body) {
                Ok(Some(path)) => println!("{}", path.display()),
                Ok(None) => {}
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(CmdError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CmdError::Check(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
