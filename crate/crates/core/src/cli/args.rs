use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cubemu", version, about = "Single-precision GEMM emulation on half-precision matrix engines")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split an f32 matrix file into high and scaled-low half matrices.
    Split(SplitArgs),
    /// Relative error of GEMM methods against the binary64 oracle.
    Gemm(GemmArgs),
    /// Underflow probabilities and retained precision bits per exponent.
    Errmodel(ErrmodelArgs),
    /// Block plan and memory traffic for a problem size.
    Plan(PlanArgs),
    /// Simulated single- and double-buffered pipeline timing.
    Pipesim(PipesimArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Input SGCM file holding an f32 matrix.
    #[arg(long)]
    pub input: PathBuf,
    /// Scaling exponent applied to the residual.
    #[arg(long, default_value_t = 12, allow_negative_numbers = true)]
    pub sb: i32,
    /// Writes `<prefix>.high.sgcm` and `<prefix>.low.sgcm`.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum MethodArg {
    Hgemm,
    CubeElementwise,
    CubeTermwise,
    F32Reference,
    #[value(alias = "oracle")]
    OracleF64,
}

#[derive(Debug, Args)]
pub struct GemmArgs {
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    #[arg(long, default_value_t = 256)]
    pub k: usize,
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    /// Methods to evaluate.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "hgemm,cube_elementwise,cube_termwise,f32_reference")]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 12, allow_negative_numbers = true)]
    pub sb: i32,
    /// Sampling exponents: a comma list and/or inclusive `lo:hi` ranges.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub e_offset: String,
    /// Sample from [0, 2^e) instead of [-2^e, 2^e).
    #[arg(long)]
    pub nonneg: bool,
    /// Seeds: a comma list and/or inclusive `lo:hi` ranges.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    /// Use this f32 matrix file as A instead of sampling.
    #[arg(long, requires = "b")]
    pub a: Option<PathBuf>,
    /// Use this f32 matrix file as B instead of sampling.
    #[arg(long, requires = "a")]
    pub b: Option<PathBuf>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ErrmodelArgs {
    #[arg(long, default_value_t = -30, allow_negative_numbers = true)]
    pub e_min: i32,
    #[arg(long, default_value_t = 15, allow_negative_numbers = true)]
    pub e_max: i32,
    /// Scaling exponents for the precision columns.
    #[arg(long, value_delimiter = ',', default_value = "0,12", allow_negative_numbers = true)]
    pub sb: Vec<i32>,
    /// Adds Monte Carlo estimates with this many samples per exponent.
    #[arg(long)]
    pub mc_samples: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HardwareArgs {
    /// JSON hardware model; built-in defaults when absent.
    #[arg(long)]
    pub hw: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub hardware: HardwareArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    /// Evaluate this `b_m,b_k,b_n` shape instead of searching.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub block: Option<Vec<usize>>,
    /// Override the resident A block count.
    #[arg(long, requires = "block")]
    pub n_fused: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Single,
    Double,
    Both,
}

#[derive(Debug, Args)]
pub struct PipesimArgs {
    #[command(flatten)]
    pub hardware: HardwareArgs,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub n: usize,
    /// Block shape `b_m,b_k,b_n`; the traffic-optimal plan when absent.
    #[arg(long, value_delimiter = ',', num_args = 1)]
    pub block: Option<Vec<usize>>,
    #[arg(long, requires = "block")]
    pub n_fused: Option<usize>,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ModeArg,
    /// Per-stage event CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Summary CSV; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
