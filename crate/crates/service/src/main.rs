use std::process::ExitCode;

use clap::Parser;

use taskvis::cli::{run_recommend, serve_addr, summary, Cli, CliError, Command};
use taskvis::http::{serve, AppState};
use taskvis::pipeline::Engine;

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Recommend(args) => {
            let engine = Engine::from_env().map_err(|e| CliError::Input(e.to_string()))?;
            let manifest = run_recommend(&args, engine)?;
            print!("{}", summary(&manifest));
            println!("wrote {} chart(s) to {}", manifest.charts.len(), args.out.display());
            Ok(())
        }
        Command::Serve(args) => {
            let addr = serve_addr(&args)?;
            let state = AppState::from_env().map_err(CliError::Input)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Failure(e.to_string()))?;
            rt.block_on(serve(state, addr)).map_err(|e| CliError::Failure(e.to_string()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("taskvis: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
