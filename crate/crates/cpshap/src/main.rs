use std::process::ExitCode;

fn main() -> ExitCode {
    cpshap::cli::run(std::env::args_os())
}
