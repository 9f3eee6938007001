use std::process::ExitCode;

use cise_cli::report::emit;
use cise_cli::{execute, Cli, CliError};
use clap::error::ErrorKind;
use clap::Parser;

fn fail(err: &CliError, code: u8) -> ExitCode {
    let body = serde_json::to_string(&err.report()).unwrap_or_else(|_| format!("{{\"schema\":1,\"error\":{{\"message\":{:?}}}}}", err.to_string()));
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_owned()), 2),
    };
    match execute(&cli.command).and_then(|(text, out)| emit(&text, out.as_deref())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e, 1),
    }
}
