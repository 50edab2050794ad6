use std::process::ExitCode;

use clap::Parser;
use parcelplan::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PARCELPLAN_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.code());
            ExitCode::FAILURE
        }
    }
}
