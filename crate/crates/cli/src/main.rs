//! `asmseq` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid usage or input, 2 problem outside the
//! limits of the requested exact method, 3 output could not be written,
//! 4 an experiment set gave up after too many infeasible runs.

mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Input("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Enumerate { common, cap } => commands::enumerate(common, *cap),
        Command::Solve { common, export_milp, sequence_cap } => commands::solve(common, *export_milp, *sequence_cap),
        Command::ExportMilp { common } => commands::export_milp(common),
        Command::Train { common, hyper, seed } => commands::train(common, hyper, *seed),
        Command::Sweep { spec, problem, out, seed, replications } => {
            commands::sweep(spec, problem.as_deref(), out, *seed, *replications)
        }
        Command::Report { common, hyper, seed, window, replications } => {
            commands::report(common, hyper, *seed, *window, *replications)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
