use std::process::ExitCode;

use clap::Parser;
use muskat_cli::config::{parse_config, Args};
use muskat_cli::run;

fn main() -> ExitCode {
    let args = Args::parse();
    let result = parse_config(&args).and_then(|plan| run::run(&plan).map(|r| (plan, r)));
    match result {
        Ok((plan, report)) if report.failures.is_empty() => {
            println!("done; summary in {}", plan.output_dir.join("summary.json").display());
            ExitCode::SUCCESS
        }
        Ok((_, report)) => {
            for f in &report.failures {
                eprintln!("numerical failure: {f}");
            }
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
