use std::process::ExitCode;

use clap::Parser;
use grinpol::cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("grinpol: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
