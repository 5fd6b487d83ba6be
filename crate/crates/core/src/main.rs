use std::process::ExitCode;

fn main() -> ExitCode {
    screenloop::cli::main()
}
