use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(nftlab::cli::run(std::env::args()) as u8)
}
