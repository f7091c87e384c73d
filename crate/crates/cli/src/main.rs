use std::process::ExitCode;

use clap::Parser;
use pedcal::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pedcal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
