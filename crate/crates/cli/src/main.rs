use std::process::ExitCode;

use clap::Parser;
use narrative_audit_cli::{exit_code, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let body = serde_json::json!({"code": e.code(), "message": e.to_string()});
            eprintln!("{body}");
            ExitCode::from(exit_code(&e))
        }
    }
}
