use std::process::ExitCode;

fn main() -> ExitCode {
    ttc::cli::run(std::env::args_os())
}
