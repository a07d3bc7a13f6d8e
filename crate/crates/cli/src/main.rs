//! Command-line entry point. Exit status: 0 when every asserted check
//! holds, 1 for usage or runtime errors, 2 when a proved inequality is
//! violated numerically (a reportable finding).

mod commands;
mod config;
mod csvio;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

#[derive(Parser, Debug)]
#[command(
    name = "vicsek-circle",
    version,
    about = "Alignment dynamics on the circle: simulate, verify, measure"
)]
struct Args {
    /// Path to the run configuration (key = value lines)
    #[arg(long)]
    config: PathBuf,

    /// Output directory (overrides the config)
    #[arg(long)]
    output: Option<PathBuf>,

    /// Verification suite to run (repeatable; for command = verify)
    #[arg(long)]
    suite: Vec<String>,

    /// Seed override for the initial condition
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read config {:?}: {e}", args.config);
            return ExitCode::from(1);
        }
    };
    let mut config = match config::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(dir) = args.output {
        config.output_dir = dir;
    }
    if !args.suite.is_empty() {
        config.verify.suites = args.suite.clone();
    }
    if let Some(seed) = args.seed {
        if let Err(e) = config::apply_override(&mut config, "ic.seed", &seed.to_string()) {
            eprintln!("error: --seed: {e}");
            return ExitCode::from(1);
        }
    }

    let result = commands::run_command(&config, &text);
    let code = commands::exit_code_for(&result);
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(code)
}
