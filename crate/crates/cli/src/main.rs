use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use decaybound_cli::{resolve_out_dir, run};

/// Evaluates, optimizes and certifies semigroup decay bounds from a TOML run file.
#[derive(Parser, Debug)]
#[command(name = "decaybound", version)]
struct Args {
    /// Run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; falls back to $DECAYBOUND_OUT_DIR, then ".".
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = args.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let out_dir = resolve_out_dir(args.out_dir);
    match run(&args.config, &out_dir) {
        Ok(outcome) => {
            for m in &outcome.messages {
                println!("{m}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
