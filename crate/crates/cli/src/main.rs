use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = stargraph_cli::Cli::parse();
    let mut out = std::io::stdout().lock();
    match stargraph_cli::run(&cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        // e.g. piped into `head`
        Err(stargraph_cli::CliError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("stargraph: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
