//! `interchain`: synthesis, achievability checks, scenario runs, sweeps,
//! pareto families and the attack library from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "interchain", version, about = "Compose blockchains into interchain ledgers and test them")]
struct Cli {
    /// Base seed for every randomized choice; echoed in the report.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum ModeArg {
    Psync,
    Sync,
}

impl From<ModeArg> for interchain_core::simnet::Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Psync => interchain_core::simnet::Mode::PartialSynchrony,
            ModeArg::Sync => interchain_core::simnet::Mode::Synchrony,
        }
    }
}

/// A target characterization: `k,s,l`, `k,s,l,b`, or a JSON file.
#[derive(Args, Debug, Clone, Serialize)]
#[group(required = true, multiple = false)]
struct Target {
    /// Threshold tuple `k,s,l`, or `k,s,l,b` in synchronous mode.
    #[arg(long)]
    ksl: Option<String>,
    /// Characterization JSON file.
    #[arg(long)]
    charac: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
enum Verb {
    /// Build a circuit meeting a characterization.
    Synth {
        #[command(flatten)]
        target: Target,
        #[arg(long, value_enum, default_value_t = ModeArg::Psync)]
        mode: ModeArg,
    },
    /// Decide achievability, or print what a circuit guarantees.
    #[command(group(ArgGroup::new("what").required(true)))]
    Check {
        #[arg(long, group = "what")]
        ksl: Option<String>,
        #[arg(long, group = "what")]
        charac: Option<PathBuf>,
        /// Circuit text, e.g. `lvl(1, 2, serial(3, 4))`.
        #[arg(long, group = "what")]
        circuit: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Psync)]
        mode: ModeArg,
    },
    /// Run one scenario file and judge it.
    Run {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Run a circuit under every fault assignment.
    #[command(group(ArgGroup::new("what").required(true)))]
    Sweep {
        #[arg(long, group = "what")]
        circuit: Option<String>,
        /// Sweep the circuit synthesized for `k,s,l`.
        #[arg(long, group = "what")]
        ksl: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Psync)]
        mode: ModeArg,
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Sweep this many cells chosen from the seed instead of all.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        /// Largest chain count swept exhaustively.
        #[arg(long, default_value_t = interchain_harness::sweep::DEFAULT_SWEEP_CAP)]
        cap: usize,
    },
    /// List the pareto-optimal characterizations for `k` chains.
    Pareto {
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Psync)]
        mode: ModeArg,
    },
    /// Whether characterization `a` dominates `b`. Each is `k,s,l` or a file.
    Dominates {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Run the scripted attacks.
    Attacks {
        /// Only the attack with this name.
        #[arg(long)]
        name: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::execute(&cli.verb, cli.seed) {
        Ok(out) => {
            let text = match cli.format {
                Format::Json => commands::json_report(&cli.verb, cli.seed, &out),
                Format::Table => commands::table_report(&cli.verb, cli.seed, &out),
            };
            let written = match &cli.out {
                Some(path) => std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            if out.mismatch {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
