use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    etsafe_cli::init_logging();
    let cli = etsafe_cli::Cli::parse();
    match etsafe_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("etsafe: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
