//! `fifdim`: box-dimension estimates for fractal interpolation functions
//! with variable vertical scaling.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use report::CliError;

#[derive(Parser, Debug)]
#[command(name = "fifdim", version, about = "Box-dimension estimates for generalized affine fractal interpolation functions")]
struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model file (TOML) or `builtin:NAME` (example61, weierstrass, affine).
    pub model: String,
    /// Builtin parameter, repeatable: `--param lambda=0.6`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct Output {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Gamma,
    Rho,
    Boxcount,
    All,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum KindArg {
    Upper,
    Lower,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a model and list every violated condition.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Graph samples on the level-k grid.
    Eval {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 6)]
        level: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Oscillation sums and the divergence certificate.
    Osc {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        /// Extra grid levels below each cell.
        #[arg(long, default_value_t = 0)]
        refine: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Scaling matrix of one level in coordinate format.
    Matrices {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1)]
        level: u32,
        #[arg(long, value_enum, default_value_t = KindArg::Upper)]
        kind: KindArg,
        #[arg(long, default_value_t = fifdim_core::matrices::DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Spectral radii of both scaling matrices for k = 1..kmax.
    Rho {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        #[arg(long, default_value_t = fifdim_core::matrices::DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Dimension bounds and verdict.
    Dim {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum, default_value_t = Method::All)]
        method: Method,
        #[arg(long, default_value_t = 8)]
        kmax: u32,
        #[arg(long, default_value_t = fifdim_core::matrices::DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
    /// Empirical box count from grid samples.
    Boxcount {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 4)]
        kmin: u32,
        #[arg(long, default_value_t = 9)]
        kmax: u32,
        #[command(flatten)]
        output: Output,
    },
    /// Recompute the radius table and dimension of the three-map example.
    Reproduce {
        #[arg(default_value = "example61")]
        example: String,
        #[arg(long, default_value_t = fifdim_core::matrices::DEFAULT_TOL)]
        tol: f64,
        #[command(flatten)]
        output: Output,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    match cli.command {
        Command::Validate { model } => commands::validate(&model),
        Command::Eval { model, level, output } => commands::eval(&model, level, &output),
        Command::Osc { model, kmax, refine, output } => commands::osc(&model, kmax, refine, &output),
        Command::Matrices { model, level, kind, tol, output } => {
            commands::matrices(&model, level, kind, tol, &output)
        }
        Command::Rho { model, kmax, tol, output } => commands::rho(&model, kmax, tol, &output),
        Command::Dim { model, method, kmax, tol, output } => commands::dim(&model, method, kmax, tol, &output),
        Command::Boxcount { model, kmin, kmax, output } => commands::boxcount(&model, kmin, kmax, &output),
        Command::Reproduce { example, tol, output } => commands::reproduce(&example, tol, &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
