//! `ocs`: solve, export, check and simulate selection instances.
//!
//! Exit status is 0 on success, 2 when the instance is infeasible and 1 on
//! any error. Errors are reported on standard error as a single JSON line
//! `{"error": <kind>, "message": <text>}`.

mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::Outcome;

fn report(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message.trim() });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            report("usage", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => commands::cmd_solve(a),
        Command::ExportSdpa(a) => commands::cmd_export_sdpa(a),
        Command::Check(a) => commands::cmd_check(a),
        Command::Generate(a) => commands::cmd_generate(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(2),
        Err(f) => {
            report(f.kind(), &f.to_string());
            ExitCode::from(1)
        }
    }
}
