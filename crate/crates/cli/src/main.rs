use std::io::Write;

use clap::Parser;
use lie_ensemble_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            std::process::exit(outcome.code);
        }
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "{e}");
            std::process::exit(e.exit_code());
        }
    }
}
