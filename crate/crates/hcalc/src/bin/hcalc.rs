use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(hcalc::cli::run(std::env::args_os()))
}
