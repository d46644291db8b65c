use std::process::ExitCode;

use clap::Parser;
use odl_cli::{emit, execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli).and_then(|out| emit(&out)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
