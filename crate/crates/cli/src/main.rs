//! `loopfiber`: batch front end for the loop-bundle toolkit.
//!
//! Every subcommand writes one JSON report (to `--out` or stdout). Exit
//! codes: 0 success, 2 input error, 3 generator-loop failure, 4 numerical
//! refinement failure, 5 check or audit failure.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::Emitter;

#[derive(Parser, Debug)]
#[command(name = "loopfiber", version, about = "Loop groups, holonomy and Fourier decompositions of loop bundles")]
struct Cli {
    /// Omit the `meta` section (timestamp, version, threads) for byte-identical reports.
    #[arg(long, global = true)]
    no_meta: bool,

    /// Write the report here instead of stdout (atomic replace).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a vector loop into its L₊ and L₋ parts.
    Project(ProjectArgs),
    /// Assemble the unitary generator loop of a filtration subspace.
    Genloop(GenloopArgs),
    /// Holonomy of a preset connection around a loop.
    Holonomy(HolonomyArgs),
    /// Winding of the holonomy over the latitude family of a preset.
    Obstruction(ObstructionArgs),
    /// Round-trip, quasi-periodicity and equivariance checks on a twisted fiber.
    Twistcheck(TwistcheckArgs),
    /// Audit a subspace family and reduce its cocycle.
    Audit(AuditArgs),
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    /// Loop JSON file `{"n", "coeffs"}`.
    #[arg(long, required_unless_present = "random", conflicts_with = "random")]
    input: Option<PathBuf>,
    /// Use a seeded random loop instead of an input file.
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fiber dimension of the random loop.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Random loop frequencies lie in `[-K, K]`.
    #[arg(long = "band", short = 'K', default_value_t = 4)]
    band: u32,
    /// Also write the L₊ part to this file.
    #[arg(long)]
    plus: Option<PathBuf>,
    /// Also write the L₋ part to this file.
    #[arg(long)]
    minus: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenloopArgs {
    /// Filtration `{"generators", "depth"}` or frame `{"n", "columns"}` JSON.
    #[arg(long)]
    input: PathBuf,
    /// Override the filtration depth P.
    #[arg(long, short = 'P')]
    depth: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Flat,
    Abelian2d,
    Monopole,
    Su2sample,
}

#[derive(Args, Debug, Clone)]
pub struct ConnectionArgs {
    #[arg(long, value_enum)]
    preset: Preset,
    /// Field strength for `abelian2d`.
    #[arg(long = "B", default_value_t = 1.0)]
    b: f64,
    /// Charge for `monopole`.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    q: i64,
    /// Fiber rank for `flat`.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    rank: u64,
}

#[derive(Args, Debug, Clone)]
pub struct LoopArgs {
    /// Radius of a counterclockwise circle.
    #[arg(long, default_value_t = 1.0, conflicts_with = "csv")]
    circle: f64,
    /// Circle center `x,y`.
    #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
    center: String,
    /// Loop CSV with header `t,x1,...,xd` sampled at `t = i/m`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HolonomyArgs {
    #[command(flatten)]
    connection: ConnectionArgs,
    #[command(flatten)]
    path: LoopArgs,
    /// Transport steps N.
    #[arg(long = "N", default_value_t = 2048, value_parser = clap::value_parser!(u64).range(16..))]
    steps: u64,
}

#[derive(Args, Debug)]
pub struct ObstructionArgs {
    #[command(flatten)]
    connection: ConnectionArgs,
    /// Transport steps N per loop.
    #[arg(long = "N", default_value_t = 512, value_parser = clap::value_parser!(u64).range(16..))]
    steps: u64,
    /// Initial family resolution M (doubled as needed).
    #[arg(long = "M", default_value_t = 32, value_parser = clap::value_parser!(u64).range(2..))]
    samples: u64,
    /// Plot-ready CSV of `s, Re h, Im h, arg h`.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TwistcheckArgs {
    #[command(flatten)]
    connection: ConnectionArgs,
    #[command(flatten)]
    path: LoopArgs,
    #[arg(long = "N", default_value_t = 2048, value_parser = clap::value_parser!(u64).range(16..))]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random `(f, v)` pairs.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pairs: u64,
    /// Override every check tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Family JSON `{"points", "edges", "psi", "transitions"}`.
    #[arg(long)]
    input: PathBuf,
}

fn configure_threads() {
    #[cfg(feature = "parallel")]
    if let Some(n) = std::env::var("LOOPFIBER_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let emitter = Emitter { with_meta: !cli.no_meta, out: cli.out };
    let result = match &cli.command {
        Command::Project(a) => commands::project(a, &emitter),
        Command::Genloop(a) => commands::genloop(a, &emitter),
        Command::Holonomy(a) => commands::holonomy(a, &emitter),
        Command::Obstruction(a) => commands::obstruction(a, &emitter),
        Command::Twistcheck(a) => commands::twistcheck(a, &emitter),
        Command::Audit(a) => commands::audit(a, &emitter),
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(f) => {
            eprintln!("loopfiber: {}", f.message);
            ExitCode::from(f.status as u8)
        }
    }
}
