use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use logbec::analysis::SweepAxis;
use logbec_cli::commands::{self, Context};
use logbec_cli::{parse_list, CliError};

/// Free expansion of Bose-Einstein condensates under a logarithmic
/// Gross-Pitaevskii model.
#[derive(Parser)]
#[command(name = "logbec", version)]
struct Cli {
    /// Output directory for CSV files.
    #[arg(long, global = true, env = "LOGBEC_OUT_DIR", default_value = ".")]
    out: PathBuf,
    /// Relative width tolerance for `validate`.
    #[arg(long, global = true, default_value_t = 0.05)]
    tolerance: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone)]
struct List(Vec<f64>);

fn list(s: &str) -> Result<List, String> {
    parse_list(s).map(List)
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Chi,
    B,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write its width trajectory.
    Simulate { config: PathBuf },
    /// Width-difference map against b = 0 over a list of χ or b values.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated χ values, or b values in eV.
        #[arg(long, value_parser = list)]
        values: List,
        /// End time in seconds.
        #[arg(long)]
        t_end: f64,
    },
    /// Far-field expansion rate and its uncertainty.
    ErrorBudget {
        config: PathBuf,
        /// Relative errors dN,da,dsigma0[,dsigmadot0].
        #[arg(long, value_parser = list)]
        errors: List,
    },
    /// Compare the variational and radial PDE solvers.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Context {
        out_dir: cli.out,
        tolerance: cli.tolerance,
    };
    let result = match &cli.command {
        Command::Simulate { config } => commands::simulate(config, &ctx),
        Command::Sweep {
            config,
            axis,
            values,
            t_end,
        } => {
            let axis = match axis {
                Axis::Chi => SweepAxis::Chi,
                Axis::B => SweepAxis::LogStrength,
            };
            commands::sweep(config, axis, &values.0, *t_end, &ctx)
        }
        Command::ErrorBudget { config, errors } => commands::error_budget(config, &errors.0, &ctx),
        Command::Validate { config } => commands::validate(config, &ctx),
    };
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(CliError::Validation(report)) => {
            print!("{report}");
            eprintln!("logbec: validation failed");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("logbec: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
