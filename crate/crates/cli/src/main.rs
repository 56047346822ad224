use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bdenet_cli::app::run_cli(std::env::args_os()) as u8)
}
