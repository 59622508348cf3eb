//! Command-line driver: solves, convergence sweeps, definiteness checks and
//! matrix exports on built-in or file meshes.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "hsbp", version, about = "Hybridized SBP-SAT elliptic solver")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One solve with an error report against the exact solution.
    Solve(SolveArgs),
    /// Manufactured-solution sweep over N = n·2^k.
    Converge(ConvergeArgs),
    /// Eigenvalue checks of local and global systems on random coefficients.
    SpdCheck(SpdArgs),
    /// Extreme eigenvalues of a local problem as the penalty grows.
    TauSweep(SweepArgs),
    /// Volume and trace point counts under refinement.
    Counts(CountsArgs),
    /// Matrix Market files and sparsity patterns of the assembled systems.
    Export(ExportArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Discretize {
    /// builtin:NAME (single, two-block, disk56) or a mesh file.
    #[arg(long)]
    pub mesh: Option<String>,
    /// Interior order 2p.
    #[arg(long, default_value_t = 2, value_parser = parse_order)]
    pub order: usize,
    /// Intervals per direction on every block.
    #[arg(long, default_value_t = 17)]
    pub n: usize,
    /// Penalty multiplier, at least 1.
    #[arg(long, default_value_t = 1.0)]
    pub tau_scale: f64,
    #[arg(long, value_enum, default_value_t = Problem::Auto)]
    pub problem: Problem,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    /// disk on builtin:disk56, linear elsewhere.
    Auto,
    /// Smooth solution with a value jump across the unit circle; blocks
    /// 1..=12 are inside.
    Disk,
    /// u = 1 + 2x − y.
    Linear,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathArg {
    Monolithic,
    Trace,
    Volume,
    All,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub disc: Discretize,
    #[arg(long, value_enum, default_value_t = PathArg::Trace)]
    pub path: PathArg,
    /// Directory for solve.csv (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub disc: Discretize,
    /// Number of resolutions.
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpdConfig {
    /// Local problem, Dirichlet on every face.
    Dirichlet,
    /// Local problem, Neumann on three faces.
    Neumann3,
    /// Local problem, Neumann on every face; singular by construction.
    AllNeumann,
    /// Global systems on the two-block mesh.
    TwoBlock,
}

#[derive(Args, Debug)]
pub struct SpdArgs {
    #[arg(long, value_enum, default_value_t = SpdConfig::Dirichlet)]
    pub config: SpdConfig,
    /// Interior order 2p (default: 2, 4 and 6).
    #[arg(long, value_parser = parse_order)]
    pub order: Option<usize>,
    /// Intervals per direction (default: the smallest grid for the order).
    #[arg(long)]
    pub n: Option<usize>,
    /// First seed; samples use seed, seed+1, ...
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub samples: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_parser = parse_order)]
    pub order: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Penalty multipliers 2^0 ..= 2^max_exp.
    #[arg(long, default_value_t = 10)]
    pub max_exp: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CountsArgs {
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long, default_value_t = 17)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub disc: Discretize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_order(s: &str) -> Result<usize, String> {
    match s {
        "2" | "4" | "6" => Ok(s.parse::<usize>().unwrap() / 2),
        _ => Err(format!("order must be 2, 4 or 6, got '{s}'")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
