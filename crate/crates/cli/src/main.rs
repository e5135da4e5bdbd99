mod commands;
mod config;
mod png;

use std::process::ExitCode;

use config::{CliError, Resolved};

/// Sizes the global pool from `SMSLAB_THREADS`; unset means hardware
/// parallelism.
fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SMSLAB_THREADS") else {
        return Ok(());
    };
    let n: usize =
        v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            CliError::Config(format!("invalid SMSLAB_THREADS: expected a positive integer, got {v:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Runtime(format!("cannot start thread pool: {e}")))
}

fn main() -> ExitCode {
    let matches = match config::command().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let result = init_threads().and_then(|_| Resolved::from_matches(name, sub)).and_then(|r| commands::run(&r));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
