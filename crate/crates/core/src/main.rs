use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use diagstrip::cli::{run, Command, EXIT_INVALID};

/// Minimal diagonally concave functions on a strip: candidates, oracle grids,
/// vector fields, fissures and reports.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    command: Command,
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            eprintln!("{}", Args::command().render_usage());
            return ExitCode::from(EXIT_INVALID as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot set thread count: {e}");
            return ExitCode::from(EXIT_INVALID as u8);
        }
    }
    ExitCode::from(run(args.command, &args.config, &args.out, args.seed) as u8)
}
