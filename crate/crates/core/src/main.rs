use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(rosce::cli::run())
}
