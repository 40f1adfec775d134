use std::path::PathBuf;
use std::process::ExitCode;

use churnlab::pipeline::{Run, Stage};
use clap::Parser;

/// Churn propensity modelling and causal analysis pipeline.
#[derive(Parser)]
#[command(name = "churnlab", version)]
struct Cli {
    /// synth | prepare | train | evaluate | explain | causal
    #[arg(value_parser = |s: &str| s.parse::<Stage>().map_err(|e| e.to_string()))]
    stage: Stage,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = Run::from_file(&cli.config, cli.out, cli.seed)
        .map_err(|e| e.in_stage(cli.stage.name()))
        .and_then(|run| run.run(cli.stage));
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
