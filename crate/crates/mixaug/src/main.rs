use clap::Parser;
use mixaug::cli::{run, Cli};
use mixaug::ExitCode;

fn main() -> std::process::ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() {
                ExitCode::Validation
            } else {
                ExitCode::Success
            };
            let _ = e.print();
            return std::process::ExitCode::from(code as u8);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code_name());
            std::process::ExitCode::from(e.exit_code() as u8)
        }
    }
}
