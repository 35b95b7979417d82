//! `corrdyn` command-line runner.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "corrdyn", version, about = "Correlation-tensor dynamics of open fermionic chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    global: Global,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Pass threshold for --compare-oracle.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<Method>,
    /// Also run the exact-diagonalization oracle and report deviations on stderr.
    #[arg(long, global = true)]
    pub compare_oracle: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Recursion,
    Reduced,
    Oracle,
}

impl std::str::FromStr for Method {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        <Method as ValueEnum>::from_str(s, true).map_err(|_| CliError::config(format!("unknown method '{s}'")))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Time evolution of observables on a time grid.
    Evolve,
    /// Liouvillian spectrum, analytic or from the sector generators.
    Spectrum {
        #[arg(long)]
        parity: Option<String>,
        #[arg(long)]
        max_order: Option<usize>,
        /// Keep only the slowest-decaying values (analytic route).
        #[arg(long)]
        keep: Option<usize>,
    },
    /// Steady-state observables.
    Steady,
    /// Full counting statistics ln⟨exp(c Σ n_j)⟩.
    Fcs,
    /// Steady-state Cov(n_1, n_L) over a δ sweep or a γ_l × γ_g grid.
    CovStudy,
    /// Model validation report.
    Validate,
    /// All structure matrices as JSON.
    DumpStructure,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub msg: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self { code: 2, msg: msg.into() }
    }

    pub fn refused(msg: impl Into<String>) -> Self {
        Self { code: 3, msg: msg.into() }
    }

    pub fn failed(msg: impl Into<String>) -> Self {
        Self { code: 1, msg: msg.into() }
    }
}

impl From<corrdyn::Error> for CliError {
    fn from(e: corrdyn::Error) -> Self {
        use corrdyn::Error::*;
        let code = match e {
            InvalidModel(_) | InvalidArgument(_) => 2,
            NotClosed { .. } | MethodRefused(_) => 3,
            SizeGuard(_) => 4,
            _ => 1,
        };
        Self { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::failed(format!("i/o error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Evolve => commands::run_table(&cli.global, &commands::evolve),
        Command::Spectrum { parity, max_order, keep } => {
            let args = commands::SpectrumArgs { parity, max_order, keep };
            commands::run_table(&cli.global, &|g, cfg| commands::spectrum(g, cfg, &args))
        }
        Command::Steady => commands::run_table(&cli.global, &commands::steady),
        Command::Fcs => commands::run_table(&cli.global, &commands::fcs),
        Command::CovStudy => commands::run_table(&cli.global, &commands::cov_study),
        Command::Validate => commands::validate(&cli.global),
        Command::DumpStructure => commands::dump_structure(&cli.global),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}
