//! `rocsurv`: fit, predict, and benchmark ROC-guided survival trees and
//! martingale-averaged survival ensembles on long-format right-censored data.

mod commands;
mod config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rocsurv",
    version,
    about = "ROC-guided survival trees and martingale-averaged survival ensembles",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a pruned survival tree by cross-validated concordance-complexity.
    FitTree(commands::FitTreeArgs),
    /// Fit an ensemble of unpruned survival trees.
    FitForest(commands::FitForestArgs),
    /// Predict survival (and optionally hazard) curves for new subjects.
    Predict(commands::PredictArgs),
    /// Replicated scenario benchmarks scored by integrated absolute error.
    Benchmark(commands::BenchmarkArgs),
    /// Generate a scenario dataset and write it in long format.
    Simulate(commands::SimulateArgs),
    /// Score an external per-subject risk score file by integrated concordance.
    EvalIcon(commands::EvalIconArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::FitTree(args) => commands::fit_tree(args),
        Command::FitForest(args) => commands::fit_forest(args),
        Command::Predict(args) => commands::predict(args),
        Command::Benchmark(args) => commands::benchmark(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::EvalIcon(args) => commands::eval_icon(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
