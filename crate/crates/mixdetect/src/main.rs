use std::process::ExitCode;

fn main() -> ExitCode {
    mixdetect::cli::main()
}
