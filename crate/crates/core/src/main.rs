use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dauction::cli::entry(std::env::args_os()) as u8)
}
