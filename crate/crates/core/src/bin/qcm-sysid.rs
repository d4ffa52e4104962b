use std::process::ExitCode;

use clap::Parser;
use qcm_sysid::cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(_) => ExitCode::SUCCESS,
        // Error messages already embed their sources.
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
