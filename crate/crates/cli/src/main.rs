//! `greybox`: dataset synthesis, identification, coefficient conversion and
//! export of plot-ready tables.

mod args;
mod commands;
mod failure;
mod provenance;

use clap::Parser;

use args::{Cli, Command};
use failure::{Failure, Status};

fn run(cli: Cli) -> Result<Status, Failure> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(a),
        Command::Identify(a) => commands::identify::run(a),
        Command::Convert(a) => commands::convert::run(a),
        Command::Export(a) => commands::export::run(a),
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(status) => status.exit_code(),
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    };
    std::process::exit(code);
}
