use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cgolab_cli::{catalog, run, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "cgolab", version, about = "Run CGO and Carleman-estimate experiments")]
struct Cli {
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: `out` from the configuration, else ./results).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments in a TOML configuration.
    Run { config: PathBuf },
    /// List the available experiments.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", catalog::render());
            ExitCode::SUCCESS
        }
        Command::Run { config } => {
            let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("error: cannot start {threads} worker threads: {e}");
                    return ExitCode::from(EXIT_ERROR as u8);
                }
            };
            match pool.install(|| run(&config, cli.seed, cli.out.as_deref(), threads)) {
                Ok(report) => {
                    for g in &report.gates {
                        let mark = if g.passed { "pass" } else { "FAIL" };
                        eprintln!("{mark} {}.{}: {}", g.experiment, g.name, g.detail);
                    }
                    eprintln!("wrote {} rows to {}", report.rows, report.out_dir.display());
                    ExitCode::from(report.exit_code as u8)
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(EXIT_ERROR as u8)
                }
            }
        }
    }
}
