use std::io::stdout;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncp_cli::{cmd_bench, cmd_check, cmd_solve, RunConfig, EXIT_MALFORMED};

/// Homotopy path-following solver for nonlinear complementarity problems.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write the solution and trace.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Trace CSV output path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Solution JSON output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate the start point and the homotopy derivatives.
    Check {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run the built-in instances and print a summary table.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory receiving one trace CSV per instance.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_MALFORMED as u8 } else { 0 });
        }
    };
    let mut out = stdout().lock();
    let code = match cli.command {
        Command::Solve { problem, config, trace, out: out_path } => {
            match RunConfig::load(&problem, config.as_deref(), trace.as_deref(), out_path.as_deref()) {
                Ok(run) => cmd_solve(&run, &mut out),
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_MALFORMED
                }
            }
        }
        Command::Check { problem, config } => cmd_check(&problem, config.as_deref(), &mut out),
        Command::Bench { config, trace_dir } => cmd_bench(config.as_deref(), trace_dir.as_deref(), &mut out),
    };
    ExitCode::from(code as u8)
}
