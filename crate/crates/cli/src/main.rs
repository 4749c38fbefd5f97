use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use panopt_cli::{run_scenario, Kind, Overrides};

/// Runs a panopt scenario and writes its artifacts.
#[derive(Debug, Parser)]
#[command(name = "panopt", version)]
struct Args {
    kind: Kind,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
    };
    match run_scenario(args.kind, &args.config, &overrides) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("panopt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
