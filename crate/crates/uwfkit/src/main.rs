use std::process::ExitCode;

fn main() -> ExitCode {
    uwfkit::cli::run(std::env::args_os())
}
