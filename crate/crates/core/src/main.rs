use std::process::ExitCode;

fn main() -> ExitCode {
    localizability::cli::main_with_args(std::env::args_os())
}
