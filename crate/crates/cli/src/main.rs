use std::process::ExitCode;

use clap::Parser;
use kerrtraj_cli::{execute, run::write_error_report, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(dirs) => {
            for dir in dirs {
                println!("{}", dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            if let Err(io) = write_error_report(&cli.common.fallback_output_dir(), &err) {
                eprintln!("error: cannot write error report: {io}");
            }
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
