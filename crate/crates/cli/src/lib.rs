//! Command-line front end for `tablebdd`: table generation, compression,
//! property verification, evaluator emission and latency benchmarks.
//!
//! The binary is a thin wrapper around [`run`], which is also what the
//! integration tests drive.

pub mod commands;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use tablebdd::bench::{Backend, DEFAULT_QUERIES};
use tablebdd::codec::CodecError;
use tablebdd::compress::{CompressError, CoverageMode};
use tablebdd::emit::{EmitError, EmitStyle, DEFAULT_EMISSION_CAP};
use tablebdd::reorder::ReorderPolicy;
use tablebdd::table::{TableError, DEFAULT_CHUNK_SIZE};
use tablebdd::verify::VerifyError;
use tablebdd::Advisory;

pub use commands::run;

/// Environment variable naming the directory that receives reports.
pub const REPORT_DIR_ENV: &str = "TABLEBDD_REPORT_DIR";

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PARTITION: i32 = 4;
pub const EXIT_INVALID: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "tablebdd", version, about = "Exact BDD compression of advisory lookup tables")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, Args)]
pub struct GlobalArgs {
    /// Grid: `default`, `reduced`, or a grid configuration file.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Seed for table generation and benchmark queries.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Table entries folded into the diagram per chunk.
    #[arg(long, global = true, default_value_t = DEFAULT_CHUNK_SIZE)]
    pub chunk_size: usize,
    /// Coverage required of the advisory roots.
    #[arg(long, global = true, value_enum, default_value_t = Coverage::Valid)]
    pub coverage: Coverage,
    /// Accept grids whose cardinalities differ from the full-size grid.
    #[arg(long, global = true)]
    pub relaxed_grid: bool,
    /// Downgrade grid fingerprint mismatches to warnings.
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic advisory table.
    Generate(GenerateArgs),
    /// Compress a table into a single-root diagram.
    Compress(CompressArgs),
    /// Check properties against a diagram.
    Verify(VerifyArgs),
    /// Generate standalone C source evaluating a diagram.
    Emit(EmitArgs),
    /// Time random queries against one or more backends.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Previous advisory the table is for.
    #[arg(long, default_value = "SR")]
    pub a_prev: Advisory,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Fraction of entries flipped after the geometric rule.
    #[arg(long)]
    pub perturbation: Option<f64>,
    /// Property file; every premise state of each applicable property is
    /// set to its first expected advisory.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
    /// With --fixture, make one premise state of the first applicable
    /// property violate it.
    #[arg(long, requires = "fixture")]
    pub inject_violation: bool,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    /// Table file written by `generate`.
    pub table: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Reorder::Periodic)]
    pub reorder: Reorder,
    /// Also dump each advisory region to its own file in this directory.
    #[arg(long)]
    pub dump_roots: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Diagram file written by `compress`.
    pub diagram: PathBuf,
    /// Property file; property 11 when omitted.
    #[arg(long)]
    pub properties: Option<PathBuf>,
    /// Source table; each verdict is cross-checked by a direct scan.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmitArgs {
    pub diagram: PathBuf,
    #[arg(long, default_value = "threaded")]
    pub style: EmitStyle,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Prefix of every emitted C identifier.
    #[arg(long, default_value = "tbdd")]
    pub prefix: String,
    /// Largest diagram, in nodes, that will be emitted.
    #[arg(long, default_value_t = DEFAULT_EMISSION_CAP)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Backend to time; repeat to compare backends on the same queries.
    #[arg(long = "backend", required = true)]
    pub backends: Vec<Backend>,
    #[arg(long)]
    pub diagram: Option<PathBuf>,
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_QUERIES)]
    pub queries: usize,
    /// Worker threads for the in-process backends.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Source style compiled for the emitted-evaluator backend.
    #[arg(long, default_value = "table")]
    pub emit_style: EmitStyle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Coverage {
    /// Every state of the grid.
    Valid,
    /// Every assignment of the 30 state bits.
    All,
}

impl From<Coverage> for CoverageMode {
    fn from(c: Coverage) -> Self {
        match c {
            Coverage::Valid => CoverageMode::Valid,
            Coverage::All => CoverageMode::All,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Reorder {
    Never,
    Final,
    Periodic,
}

impl From<Reorder> for ReorderPolicy {
    fn from(r: Reorder) -> Self {
        match r {
            Reorder::Never => ReorderPolicy::Never,
            Reorder::Final => ReorderPolicy::Final,
            Reorder::Periodic => ReorderPolicy::default(),
        }
    }
}

/// Text for stdout and the process exit code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub text: String,
    pub exit_code: i32,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Compress(#[from] CompressError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Disagreement(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. }
            | CliError::Table(TableError::Io(_))
            | CliError::Codec(CodecError::Io(_))
            | CliError::Verify(VerifyError::Io(_))
            | CliError::Emit(EmitError::Io(_)) => EXIT_IO,
            CliError::Compress(CompressError::PartitionFailed(_)) => EXIT_PARTITION,
            _ => EXIT_OTHER,
        }
    }
}
