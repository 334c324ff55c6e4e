use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qlnls::cli::{run, Command, Invocation};

#[derive(Parser)]
#[command(name = "qlnls", version, about = "Control and Cauchy solvers for quasi-linear Schrodinger equations on the circle")]
struct Args {
    #[command(subcommand)]
    command: Sub,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Per-key override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Linear Cauchy problem through both solver routes.
    Simulate,
    /// Reduction diagnostics.
    Reduce,
    /// Ingham and observability constants.
    Observe,
    /// Linear HUM control.
    #[command(name = "control-lin")]
    ControlLin,
    /// Nonlinear control by Nash-Moser iteration.
    Control,
    /// Nonlinear Cauchy problem by Nash-Moser iteration.
    Cauchy,
    /// Invariant suite.
    Check,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Simulate => Command::Simulate,
            Sub::Reduce => Command::Reduce,
            Sub::Observe => Command::Observe,
            Sub::ControlLin => Command::ControlLin,
            Sub::Control => Command::Control,
            Sub::Cauchy => Command::Cauchy,
            Sub::Check => Command::Check,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let inv = Invocation {
        config: args.config,
        out: args.out,
        seed: args.seed,
        overrides: args.set,
    };
    match run(args.command.into(), &inv) {
        Ok(summary) => {
            for (k, v) in &summary.residuals {
                println!("{k} = {v:.6e}");
            }
            println!("wrote {} files to {}", summary.files.len() + 2, summary.out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qlnls: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
