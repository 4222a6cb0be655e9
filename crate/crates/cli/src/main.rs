use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sosrelax_cli::commands::{self, Flags, SosCheck};

#[derive(Parser)]
#[command(name = "sosrelax", version, about = "Exact SDP relaxations for SOS-convex semialgebraic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Solver tolerance on residuals and gap.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    /// Proceed when no strictly feasible point is found.
    #[arg(long, global = true)]
    assume_slater: bool,
    /// Also write the assembled primal (and dual, with a -dual suffix) in SDPA format.
    #[arg(long, global = true, value_name = "PATH")]
    dump_sdp: Option<PathBuf>,
    /// Skip recovery of a minimizer.
    #[arg(long, global = true)]
    no_recovery: bool,
    /// Seed for robust verification sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Scenarios sampled per robust constraint.
    #[arg(long, global = true, default_value_t = 64)]
    samples: usize,
    /// Omit the timestamp and wall-clock time so reports are reproducible.
    #[arg(long, global = true)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file.
    Solve { file: PathBuf },
    /// Solve a robust problem file and verify worst-case feasibility.
    SolveRobust { file: PathBuf },
    /// Evaluate every function of a problem file at a point.
    Eval {
        file: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long, allow_hyphen_values = true)]
        x: String,
    },
    /// Decide whether an inline polynomial is a sum of squares.
    CheckSos {
        #[arg(allow_hyphen_values = true)]
        poly: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        gram: bool,
        #[arg(long)]
        decompose: bool,
    },
    /// Decide whether an inline polynomial is SOS-convex.
    CheckSosconvex {
        #[arg(allow_hyphen_values = true)]
        poly: String,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        gram: bool,
        #[arg(long)]
        decompose: bool,
    },
    /// Write the assembled primal and dual in SDPA format without solving.
    DumpSdp { file: PathBuf, out: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let flags = Flags {
        tol: cli.tol,
        max_iter: cli.max_iter,
        assume_slater: cli.assume_slater,
        dump_sdp: cli.dump_sdp,
        no_recovery: cli.no_recovery,
        seed: cli.seed,
        samples: cli.samples,
        no_timestamp: cli.no_timestamp,
    };
    let out = match &cli.command {
        Command::Solve { file } => commands::solve(file, &flags),
        Command::SolveRobust { file } => commands::solve_robust(file, &flags),
        Command::Eval { file, x } => commands::eval(file, x, &flags),
        Command::CheckSos { poly, n, gram, decompose } => {
            commands::check(SosCheck::Sos, poly, *n, *gram, *decompose, &flags)
        }
        Command::CheckSosconvex { poly, n, gram, decompose } => {
            commands::check(SosCheck::SosConvex, poly, *n, *gram, *decompose, &flags)
        }
        Command::DumpSdp { file, out } => commands::dump_sdp(file, out, &flags),
    };
    println!("{}", out.report);
    eprintln!("{}", out.summary);
    ExitCode::from(out.code as u8)
}
