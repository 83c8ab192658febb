use std::process::ExitCode;

use vhetnet_jubd::harness::{parse_cli, run_experiment};
use vhetnet_jubd::Error;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let config = match parse_cli(std::env::args_os()) {
        Ok(c) => c,
        Err(Error::Usage(e)) => e.exit(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&config) {
        Ok(out) => {
            log::info!(
                "{} runs accepted, {} failed; wrote {}",
                out.results.len(),
                out.failures.len(),
                config.output_dir.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
