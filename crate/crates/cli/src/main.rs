//! `majorize` command-line tool.
//!
//! Exit status: 0 on success, 1 on domain errors and negative verdicts under
//! `--require` / `--expect-isometry`, 2 on I/O, parse and schema errors.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "majorize",
    version,
    about = "Majorization, entropy and Kraus-channel numerics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Shannon entropy of a vector, or von Neumann entropy of a state (bits).
    Entropy(RunArgs),
    /// Test `a ≺ b` for two vectors or two states.
    Majorize(RunArgs),
    /// T-transform chain and doubly stochastic matrix taking `b` to `a`.
    Transfer(RunArgs),
    /// Birkhoff–von Neumann decomposition of a doubly stochastic matrix.
    Birkhoff(RunArgs),
    /// Orthogonal `U` with `diag(U diag(b↓) Uᵀ) = a↓`.
    SchurHorn(RunArgs),
    /// Rank-one bistochastic channel mapping `ρ₂` (second input) to `ρ₁` (first).
    Uhlmann(RunArgs),
    /// Mixed-unitary channel mapping `ρ₂` (second input) to `ρ₁` (first).
    MixedUnitary(RunArgs),
    /// Phase-averaging convergence table (CSV) for a state and optional basis.
    PinchConverge(RunArgs),
    /// Decide whether a channel is an isometric conjugation.
    DetectIsometry(RunArgs),
    /// Largest entropy change over random full-rank input states.
    ProbeEntropy(RunArgs),
    /// Generate random vectors, states, matrices or channels.
    Gen(GenArgs),
}

/// Options shared by every subcommand; each uses the ones it needs.
#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// Input file; repeat for commands with several operands (order matters).
    #[arg(long = "in", value_name = "PATH")]
    pub inputs: Vec<PathBuf>,
    /// Output file (standard output when omitted).
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the command's main tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Dimension.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Exit with status 1 when the majorization verdict is negative.
    #[arg(long)]
    pub require: bool,
    /// Exit with status 1 when the detector verdict is negative.
    #[arg(long)]
    pub expect_isometry: bool,
}

#[derive(Args, Debug, Clone)]
pub struct GenArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum)]
    pub kind: GenKind,
    /// Number of Kraus terms for generated channels.
    #[arg(long)]
    pub terms: Option<usize>,
    /// Output dimension of an isometric channel (defaults to `--d`).
    #[arg(long)]
    pub d_out: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenKind {
    /// Vectors `{"a", "b"}` with `a ≺ b`.
    Pair,
    /// A random density matrix.
    State,
    /// States `{"rho1", "rho2"}` with `ρ₁ ≺ ρ₂`.
    StatePair,
    /// The doubly stochastic matrix of a random transfer chain.
    DoublyStochastic,
    /// A random mixture of unitaries (bistochastic).
    MixedUnitaryChannel,
    /// `X ↦ VXV*` written with redundant phase-multiple Kraus terms.
    IsometricChannel,
    /// Pinching in a random orthonormal basis.
    DephasingChannel,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(status) => status.into(),
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.status().into()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Negative,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Success => ExitCode::SUCCESS,
            Status::Negative => ExitCode::from(1),
        }
    }
}
