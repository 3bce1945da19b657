use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncrep::commands::{self, Output};
use ncrep::suites::{failure_dir_for, run_suite, Suite, SuiteConfig};
use ncrep::{instance, CliResult, Report, EXIT_INPUT};

/// Conditional expectations and representing measures on matrix algebras.
#[derive(Parser)]
#[command(name = "ncrep", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the existence table for the instance's state and D.
    Diagnose {
        file: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build the representing measure and expectation for the instance's character.
    Represent {
        file: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check Jensen's equality on random invertible elements of A.
    Jensen {
        file: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run a randomized verification suite.
    Suite {
        #[arg(value_enum)]
        name: Suite,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// JSON report; failing instances go to `<report>.failures/`.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn finish(out: Output, path: Option<&Path>) -> CliResult<i32> {
    print!("{}", out.text);
    finish_report(&out.report, path)
}

fn finish_report(report: &Report, path: Option<&Path>) -> CliResult<i32> {
    print!("{}", report.render());
    if let Some(p) = path {
        report.write_json(p)?;
    }
    Ok(report.exit_code())
}

fn run(cli: Cli) -> CliResult<i32> {
    ncrep::init_tolerance_from_env()?;
    match cli.command {
        Command::Diagnose { file, report } => finish(commands::diagnose(&instance::load(&file)?)?, report.as_deref()),
        Command::Represent { file, report } => finish(commands::represent(&instance::load(&file)?)?, report.as_deref()),
        Command::Jensen { file, trials, seed, report } => {
            finish(commands::jensen(&instance::load(&file)?, trials, seed)?, report.as_deref())
        }
        Command::Suite { name, n_max, trials, seed, report, inject_fault } => {
            let failure_dir = report.as_deref().map(failure_dir_for);
            let cfg = SuiteConfig { n_max, trials, seed, inject_fault, failure_dir };
            finish_report(&run_suite(name, &cfg)?, report.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    };
    ExitCode::from(code as u8)
}
