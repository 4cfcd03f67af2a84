use std::io::Write;
use std::process::ExitCode;

use bvp_spectra::cli::{error_json, run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            let _ = std::io::stderr().write_all(error_json(&e).as_bytes());
            ExitCode::from(1)
        }
    }
}
