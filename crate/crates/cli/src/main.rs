use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bellspace_core::Error;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "bellspace", version, about = "Bell-CHSH inequalities on explicit Kolmogorov probability spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Detection {
    Independent,
    Conspiratorial,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a Bell experiment from a model and report the estimated table.
    Simulate {
        /// Model JSON file.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        runs: u64,
        #[arg(long, env = "BELLSPACE_SEED", default_value_t = 0)]
        seed: u64,
        /// Per-side detection efficiency in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        /// Weights of the setting pairs (α,β),(α,β'),(α',β),(α',β').
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0, 1.0, 1.0])]
        policy: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Detection::Independent)]
        detection: Detection,
        /// Where to write the run log.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run log format.
        #[arg(long, value_enum, default_value_t = LogFormat::Csv)]
        format: LogFormat,
        /// Format of the summary printed to stdout.
        #[arg(long, value_enum, default_value_t = Format::Text)]
        summary: Format,
    },
    /// Evaluate inequalities on a table, model, measure or counterfactual rows.
    Evaluate {
        #[command(flatten)]
        input: commands::EvalInput,
        /// 1, 2, 3, freq or all.
        #[arg(long, default_value = "all")]
        inequality: String,
        /// Declare locality for a space-3 measure.
        #[arg(long)]
        locality: bool,
        /// Declare λ-independence for a space-3 measure.
        #[arg(long)]
        lambda_independence: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Decide whether a table admits a joint distribution.
    Feasibility {
        #[arg(long)]
        table: PathBuf,
        /// Also compute the minimal-negativity signed joint.
        #[arg(long)]
        negativity: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// The six-run worked example.
    Table1 {
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Grid search of the quantum 0/1 CHSH value over analyzer angles.
    ScanAngles {
        /// Grid step in degrees; must divide 360.
        #[arg(long)]
        step: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Hypotheses each inequality depends on.
    Ledger {
        #[arg(long, default_value = "all")]
        inequality: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InsufficientCoverage(_) | Error::EmptyLog => 3,
        Error::HypothesisViolation(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { model, runs, seed, eta, policy, detection, out, format, summary } => {
            commands::simulate(commands::SimulateArgs { model, runs, seed, eta, policy, detection, out, format, summary })
        }
        Command::Evaluate { input, inequality, locality, lambda_independence, format } => {
            commands::evaluate(&input, &inequality, locality, lambda_independence, format)
        }
        Command::Feasibility { table, negativity, format } => commands::feasibility(&table, negativity, format),
        Command::Table1 { format } => commands::table1(format),
        Command::ScanAngles { step, format } => commands::scan_angles(&step, format),
        Command::Ledger { inequality, format } => commands::ledger(&inequality, format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
