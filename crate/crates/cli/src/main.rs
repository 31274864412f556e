use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod sweep;

#[derive(Parser)]
#[command(name = "hierbvn", version, about = "Hierarchical BvN scheduling and DFS crossbar simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a matrix file into a schedule of subpermutations.
    Decompose {
        matrix: PathBuf,
        /// Block-structured decomposition (default).
        #[arg(long, conflicts_with = "flat")]
        hierarchical: bool,
        /// Decompose the whole matrix directly.
        #[arg(long)]
        flat: bool,
        /// Schedule output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Balance each server-pair block of a matrix file.
    Balance {
        matrix: PathBuf,
        /// Block size. Defaults to the file's `m`, or the whole matrix when
        /// the header is `N 1`.
        #[arg(long)]
        m: Option<usize>,
        /// Leave diagonal (intra-server) blocks untouched.
        #[arg(long)]
        skip_diagonal: bool,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that a schedule file clears a matrix file.
    Verify { matrix: PathBuf, schedule: PathBuf },
    /// Run DFS simulations over a parameter sweep and emit CSV.
    Simulate(Box<sweep::SimulateArgs>),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Decompose {
            matrix,
            flat,
            out,
            ..
        } => commands::decompose(&matrix, flat, out.as_deref()),
        Command::Balance {
            matrix,
            m,
            skip_diagonal,
            out,
        } => commands::balance(&matrix, m, skip_diagonal, out.as_deref()),
        Command::Verify { matrix, schedule } => commands::verify(&matrix, &schedule),
        Command::Simulate(args) => sweep::simulate(*args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
