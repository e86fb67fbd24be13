use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nlfem::cli::run::run_file;
use nlfem::cli::Command;

/// Nonlocal P1 finite elements in one dimension.
#[derive(Parser)]
#[command(name = "nlfem", version)]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// Key-value configuration file.
    #[arg(long, short)]
    config: PathBuf,
    /// Prefix for every output file (overrides the `out` key).
    #[arg(long, short)]
    out: Option<String>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run_file(args.command, &args.config, args.out.as_deref(), &mut lock) {
        Ok(files) => {
            for f in files {
                let _ = writeln!(lock, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nlfem: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
