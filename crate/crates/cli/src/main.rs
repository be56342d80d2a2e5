use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use uxkpi_cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    uxkpi_cli::init_logging(cli.config.verbose);
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match uxkpi_cli::run(cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
