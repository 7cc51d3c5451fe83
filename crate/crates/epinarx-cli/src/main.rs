use std::process::ExitCode;

fn main() -> ExitCode {
    epinarx_cli::run()
}
