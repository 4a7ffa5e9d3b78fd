use std::process::ExitCode;

use calibra_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            for line in &summary.lines {
                println!("{line}");
            }
            ExitCode::from(summary.code as u8)
        }
        Err(e) => {
            eprintln!("calibra {}: {e}", cli.command.name());
            ExitCode::from(e.code as u8)
        }
    }
}
