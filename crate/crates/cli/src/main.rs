use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfpsro_cli::commands::first_step_below;
use mfpsro_cli::output::SummaryRow;
use mfpsro_cli::{cmd_compare, cmd_compress_demo, cmd_run, CliError, Invocation};

#[derive(Parser)]
#[command(name = "mfpsro", version)]
#[command(about = "Mean-field PSRO experiments: equilibrium runs, solver comparisons and compression demos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver, once per repeat
    Run(Common),
    /// Run every solver listed under [[solvers]] on the same game
    Compare(Common),
    /// Log uniform-average vs compressed device regret along one regret loop
    CompressDemo(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML, or JSON with a .json extension)
    #[arg(long)]
    config: PathBuf,
    /// Base seed; overrides the config
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum concurrent runs
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory; overrides the config
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn invocation(&self) -> Result<Invocation, CliError> {
        Invocation::load(&self.config, self.seed, self.jobs, self.output.clone())
    }
}

fn print_summary(rows: &[SummaryRow]) {
    println!("{:<16} {:>6} {:>14} {:>10} {:>12}", "algorithm", "seed", "final_gap", "iterations", "wall_time_s");
    for r in rows {
        println!(
            "{:<16} {:>6} {:>14.6e} {:>10} {:>12.3}",
            r.algorithm, r.seed, r.final_gap, r.iterations, r.wall_time_s
        );
    }
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Run(c) => {
            let inv = c.invocation()?;
            print_summary(&cmd_run(&inv)?);
            println!("wrote {}", inv.output_dir.display());
        }
        Command::Compare(c) => {
            let inv = c.invocation()?;
            print_summary(&cmd_compare(&inv)?);
            println!("wrote {}", inv.output_dir.display());
        }
        Command::CompressDemo(c) => {
            let inv = c.invocation()?;
            let rows = cmd_compress_demo(&inv)?;
            let show = |s: Option<usize>| s.map_or("never".to_string(), |s| s.to_string());
            if let Some(last) = rows.last() {
                println!(
                    "steps {}  uniform {:.6e}  compressed {:.6e}  atoms {}",
                    last.step, last.uniform_gap, last.compressed_gap, last.nonzero_atoms
                );
            }
            println!(
                "first step <= 1e-3: uniform {}, compressed {}",
                show(first_step_below(&rows, 1e-3, |r| r.uniform_gap)),
                show(first_step_below(&rows, 1e-3, |r| r.compressed_gap)),
            );
            println!("wrote {}", inv.output_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.exit_code() == 2 {
                eprintln!("error: {e}");
            } else {
                let msg = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
                eprintln!("{msg}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
