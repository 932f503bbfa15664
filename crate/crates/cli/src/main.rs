use std::process::ExitCode;

fn main() -> ExitCode {
    spherical::cli::main()
}
