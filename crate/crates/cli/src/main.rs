use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = match cutfem_cli::Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    cutfem_cli::main_with(&args)
}
