use std::process::ExitCode;

use clap::Parser;
use tuckerscf::config::{Cli, Command};
use tuckerscf::driver::{box_sweep, run, CliError};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args).and_then(|report| {
            match &report.extrapolated {
                Some(e) => println!("{}: E = {:.8}, HOMO = {:.8} (extrapolated)", report.system, e.energy, e.homo),
                None => {
                    if let Some(l) = report.levels.last() {
                        println!("{}: E = {:.8}, HOMO = {:.8} (n = {})", report.system, l.energy, l.homo, l.n);
                    }
                }
            }
            if report.converged {
                Ok(())
            } else {
                Err(CliError::NotConverged)
            }
        }),
        Command::BoxSweep(args) => box_sweep(args).and_then(|rows| {
            for r in &rows {
                println!("L = {:8.4}  n = {:4}  E = {:.8}  rel_error = {:.3e}", r.half_width, r.n, r.energy, r.rel_error);
            }
            if rows.iter().all(|r| r.converged) {
                Ok(())
            } else {
                Err(CliError::NotConverged)
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
