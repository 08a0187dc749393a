use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use ocs_core::formulation::Formulation;

#[derive(Debug, Parser)]
#[command(name = "ocs", version, about = "Optimal contribution selection by second-order cone programming")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one instance and write contributions plus a JSON summary.
    Solve(SolveArgs),
    /// Write the SDP form of an instance in sparse SDPA format.
    ExportSdpa(ExportArgs),
    /// Solve under all three formulations and compare against dense oracles.
    Check(CheckArgs),
    /// Simulate a pedigree and write it as CSV.
    Generate(GenerateArgs),
}

/// A bound given either as one value for every member or as a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundSpec {
    Scalar(f64),
    File(PathBuf),
}

impl FromStr for BoundSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(BoundSpec::Scalar(v)),
            Ok(_) => Err(format!("bound `{s}` is not finite")),
            Err(_) => Ok(BoundSpec::File(PathBuf::from(s))),
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` must be positive"))
    }
}

fn formulation(s: &str) -> Result<Formulation, String> {
    s.parse().map_err(|e: ocs_core::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    /// Pedigree CSV with header `id,sire,dam,ebv`.
    #[arg(long)]
    pub pedigree: PathBuf,
    /// Upper limit on group coancestry xᵀAx/2.
    #[arg(long, value_parser = positive)]
    pub theta: f64,
    /// Lower bound: a number or a CSV file `id,bound`.
    #[arg(long, default_value = "0")]
    pub lower: BoundSpec,
    /// Upper bound: a number or a CSV file `id,bound`.
    #[arg(long, default_value = "1")]
    pub upper: BoundSpec,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Gap and feasibility tolerance.
    #[arg(long, value_parser = positive)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Print one line per interior-point iteration to standard error.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    #[arg(long, default_value = "compact", value_parser = formulation)]
    pub formulation: Formulation,
    /// Contributions CSV (`id,contribution`); standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON; standard error when omitted.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Also write the conic problem as a plain-text dump.
    #[arg(long)]
    pub dump: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Destination `.dat-s` file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub instance: InstanceArgs,
    /// Largest accepted objective delta and feasibility residual.
    #[arg(long, default_value = "1e-7", value_parser = positive)]
    pub agreement: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub founders: usize,
    #[arg(long, default_value_t = 5)]
    pub cycles: usize,
    #[arg(long, default_value_t = 20)]
    pub offspring: usize,
    /// Fraction of candidates kept as parents in each cycle.
    #[arg(long, default_value_t = 0.5)]
    pub selection_fraction: f64,
    /// Destination CSV; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
