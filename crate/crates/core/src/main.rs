use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use ou_kernels::cli::{error_exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((record, format)) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(record.render(format).as_bytes()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(record.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
