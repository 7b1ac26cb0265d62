use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = khsat::cli::Cli::parse();
    let code = khsat::cli::run(&cli, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
