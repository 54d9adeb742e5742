//! `nswcp`: solve, verify and generate NSW and scheduling instances.
//!
//! Exit codes: 0 success, 1 input error, 2 infeasible, 3 a reported property failed.

mod commands;
mod io;
mod report;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use commands::{CmdError, RoundMode, SolveOptions, Suite, VerifyOptions};
use io::{ObjectiveSpec, Weights};

#[derive(Parser)]
#[command(name = "nswcp", version, about = "Convex relaxations and rounding for Nash social welfare and scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the NSW relaxation of an instance and round it.
    SolveNsw {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.001)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = RoundArg::Best)]
        round: RoundArg,
        /// Write the full relaxation LP in MPS format.
        #[arg(long, value_name = "FILE")]
        dump_lp: Option<PathBuf>,
    },
    /// Solve a scheduling relaxation and round it.
    SolveSched {
        #[arg(long)]
        input: PathBuf,
        /// l2, lk:K or completion; defaults to the file's objective.
        #[arg(long, value_parser = ObjectiveSpec::parse)]
        objective: Option<ObjectiveSpec>,
        #[arg(long, default_value_t = 0.001)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = RoundArg::Best)]
        round: RoundArg,
        #[arg(long, value_name = "FILE")]
        dump_lp: Option<PathBuf>,
    },
    /// Check the properties of one suite; exits 3 if any fails.
    Verify {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum)]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0.001)]
        eps: f64,
        #[arg(long, value_parser = ObjectiveSpec::parse)]
        objective: Option<ObjectiveSpec>,
    },
    /// Print a random instance.
    Gen {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Agents (nsw) or jobs (sched).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// Items (nsw) or machines (sched).
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        m: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = WeightsArg::Uniform)]
        weights: WeightsArg,
        /// Write to FILE instead of stdout.
        #[arg(long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RoundArg {
    Best,
    Sample,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Nsw,
    Fsr,
    Ef1,
    Sched,
    Alpha,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Nsw,
    Sched,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsArg {
    Uniform,
    Dirichlet,
}

fn round_mode(r: RoundArg) -> RoundMode {
    match r {
        RoundArg::Best => RoundMode::Best,
        RoundArg::Sample => RoundMode::Sample,
    }
}

fn to_json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

fn emit(json: &str, summary: &str, pass: bool) -> Result<ExitCode, CmdError> {
    std::io::stdout()
        .write_all(json.as_bytes())
        .map_err(|e| CmdError::Input(format!("cannot write report: {e}")))?;
    eprintln!("{summary}");
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn run(cli: Cli) -> Result<ExitCode, CmdError> {
    match cli.command {
        Command::SolveNsw { input, eps, seed, round, dump_lp } => {
            let r = commands::solve_nsw(&SolveOptions { input, eps, seed, round: round_mode(round), dump_lp })?;
            emit(&to_json(&r), &r.summary(), r.passed())
        }
        Command::SolveSched { input, objective, eps, seed, round, dump_lp } => {
            let opts = SolveOptions { input, eps, seed, round: round_mode(round), dump_lp };
            let r = commands::solve_sched(&opts, objective)?;
            emit(&to_json(&r), &r.summary(), r.passed())
        }
        Command::Verify { input, suite, eps, objective } => {
            let suite = match suite {
                SuiteArg::Nsw => Suite::Nsw,
                SuiteArg::Fsr => Suite::Fsr,
                SuiteArg::Ef1 => Suite::Ef1,
                SuiteArg::Sched => Suite::Sched,
                SuiteArg::Alpha => Suite::Alpha,
            };
            let r = commands::verify(&VerifyOptions { suite, input, eps, objective })?;
            emit(&to_json(&r), &r.summary(), r.pass)
        }
        Command::Gen { kind, n, m, seed, weights, output } => {
            let (n, m) = (n as usize, m as usize);
            let text = match kind {
                KindArg::Nsw => {
                    let w = match weights {
                        WeightsArg::Uniform => Weights::Uniform,
                        WeightsArg::Dirichlet => Weights::Dirichlet,
                    };
                    to_json(&io::generate_nsw(n, m, seed, w))
                }
                KindArg::Sched => to_json(&io::generate_sched(n, m, seed)),
            };
            match output {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| CmdError::Input(format!("cannot write {}: {e}", path.display())))?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    // Usage errors are input errors; clap's own code 2 means infeasible here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
