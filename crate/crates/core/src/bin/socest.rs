use std::process::ExitCode;

fn main() -> ExitCode {
    socest::cli::init_logging();
    let code = socest::cli::main_with_args(std::env::args_os());
    ExitCode::from(code as u8)
}
