use std::process::ExitCode;

fn main() -> ExitCode {
    moma::cli::main()
}
