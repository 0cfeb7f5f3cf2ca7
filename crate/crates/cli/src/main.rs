mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Household–workplace SIR epidemics: stochastic simulation, reduced ODE
/// system, edge-based model and their comparison.
#[derive(Debug, Parser)]
#[command(name = "hwsir", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the scenario replicate count.
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also write an SVG plot.
    #[arg(long)]
    svg: bool,
    /// Align curves at the first time the infected proportion reaches this level.
    #[arg(long)]
    align_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Model {
    Ssa,
    Ode,
    Ebcm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Form {
    Corrected,
    Printed,
}

impl From<Form> for hwsir::ebcm::BalanceForm {
    fn from(f: Form) -> Self {
        match f {
            Form::Corrected => Self::Corrected,
            Form::Printed => Self::Printed,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run stochastic replicates; one CSV per replicate plus an ensemble summary.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the reduced ODE system.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Start from an inferred structure histogram (JSON from `infer-ic`).
        #[arg(long)]
        initial: Option<PathBuf>,
        /// Write every state coordinate, not only s, i, r.
        #[arg(long)]
        full_state: bool,
    },
    /// Solve the edge-based compartmental model.
    Ebcm {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "corrected")]
        form: Form,
        #[arg(long)]
        full_state: bool,
    },
    /// Sup distances between models, pairwise.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "ssa,ode")]
        models: Vec<Model>,
        #[arg(long, value_enum, default_value = "corrected")]
        form: Form,
    },
    /// Normalised runtimes of one stochastic replicate and one ODE solve.
    Bench {
        /// Scenario files; the built-in ten-scenario ladder when omitted.
        #[arg(long)]
        scenario: Vec<PathBuf>,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        /// Length of the reference summation loop.
        #[arg(long, default_value_t = 1_000_000_000)]
        reference_n: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Average structure histogram of single-seed epidemics reaching a prevalence.
    InferIc {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.01)]
        stop_level: f64,
    },
    /// Build one population graph and write its membership table.
    Graph {
        #[command(flatten)]
        common: Common,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}
