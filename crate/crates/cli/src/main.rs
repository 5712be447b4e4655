use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use volterra_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // a bad invocation is a configuration error
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    ExitCode::from(execute(&cli) as u8)
}
