use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bayes_lmm::cli::run(std::env::args_os()))
}
