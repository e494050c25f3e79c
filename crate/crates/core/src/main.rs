use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use dlh_core::cli::{self, Cli};
use dlh_core::integrate::init_thread_pool_from_env;

fn main() -> ExitCode {
    let args = Cli::parse();
    init_thread_pool_from_env();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = cli::run(args, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
