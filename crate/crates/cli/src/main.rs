#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vekua_core::{Level, Method};

mod run;

/// Solver for generalized Cauchy-Riemann equations with singular coefficients.
#[derive(Parser, Debug)]
#[command(name = "vekua", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the inhomogeneous equation.
    Solve(Common),
    /// Remove `A` by the exponential substitution and write `w`, `μ`, `B₁`, `F₁`.
    Reduce(Common),
    /// Model exponents and angular profiles for the `exponents` block.
    Exponents(Common),
    /// Build a homogeneous solution with prescribed vanishing order.
    Homogeneous(Common),
    /// Run the invariant checks.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "quick")]
        level: Level,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Cells across the longer side of the domain.
    #[arg(long, value_parser = clap::value_parser!(u16).range(4..=run::MAX_N as i64))]
    pub n: Option<u16>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Acceptance bound for the weighted PDE residual.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common, level) = match cli.command {
        Command::Solve(c) => ("solve", c, None),
        Command::Reduce(c) => ("reduce", c, None),
        Command::Exponents(c) => ("exponents", c, None),
        Command::Homogeneous(c) => ("homogeneous", c, None),
        Command::Verify { common, level } => ("verify", common, Some(level)),
    };
    let code = run::run(name, &common, level);
    ExitCode::from(code)
}
