use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cns_cli::{execute, parse_config, Failure, RunConfig};

/// Runs, identity suites, consistency studies, rate tables and EOC studies.
///
/// Exit status: 0 success, 1 i/o error, 2 invalid input, 3 solver failure,
/// 4 invariant violation.
#[derive(Parser)]
#[command(name = "cns", version)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated ladder for `eoc` and `consistency`, e.g. `16,32,64`.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
}

fn configure(args: Args) -> Result<RunConfig, Failure> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(out) = args.out {
        cfg.out = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(levels) = args.levels {
        cfg = cfg.with_levels(levels)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    let result = configure(args).and_then(|cfg| execute(&cfg, &mut std::io::stdout().lock()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
