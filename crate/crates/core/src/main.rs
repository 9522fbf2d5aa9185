use std::process::ExitCode;

fn main() -> ExitCode {
    attrnorm::cli::main()
}
