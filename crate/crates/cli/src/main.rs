//! `weightflow` command-line tool.
//!
//! Exit codes: 0 on success, 1 for input or configuration errors, 2 for numerical
//! failures. Every subcommand prints a one-line JSON summary on stdout and writes a
//! `resolved_config.json` next to its outputs.

mod commands;
mod resolve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "weightflow", version, about = "Gradient-flow training dynamics and loss-outcome prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the regression dataset as CSV (x1,x2,y).
    GenData(GenDataArgs),
    /// Train one network and write its run record and R-factor log.
    Run(TrainArgs),
    /// Train an ensemble and write the outcome table and scatter exports.
    Ensemble(TrainArgs),
    /// Compare analytic and finite-difference Jacobians at random states.
    JacobianCheck(JacobianArgs),
    /// Fit naive Bayes on an outcome table and score every run.
    Classify(PredictArgs),
    /// ROC curve and AUC of one predictor on the test split.
    Roc(PredictArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; defaults to `<out-dir>/data.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// JSON file with TrainConfig fields (plus `n_runs`, `parallelism`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Sets all four seeds.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_runs: Option<usize>,
    #[arg(long, value_parser = ["relu", "tanh", "gelu"])]
    activation: Option<String>,
    #[arg(long, value_parser = ["he", "wide"])]
    init: Option<String>,
    #[arg(long)]
    wide_sigma: Option<f64>,
    #[arg(long)]
    total_steps: Option<usize>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Override any config key, e.g. `--set seeds.init=4 --set checkpoints=[500,1000]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct JacobianArgs {
    #[arg(long, default_value = "tanh", value_parser = ["relu", "tanh", "gelu"])]
    activation: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 8)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-6)]
    step: f64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Outcome table CSV written by `ensemble`.
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Final-loss threshold; defaults to 100 above and 4 below.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "above", value_parser = ["above", "below"])]
    direction: String,
    /// `ftle`, `ftle<q>`, `meancos`, `loss` or `cos<i>_<j>`.
    #[arg(long, default_value = "ftle")]
    feature: String,
    /// Checkpoint interval; defaults to 1000 when present, else the first one.
    #[arg(long)]
    checkpoint: Option<usize>,
    #[arg(long, default_value_t = weightflow::prediction::DEFAULT_BINS)]
    bins: usize,
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
    let outcome = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Run(a) => commands::run(a),
        Command::Ensemble(a) => commands::ensemble(a),
        Command::JacobianCheck(a) => commands::jacobian_check(a),
        Command::Classify(a) => commands::classify(a),
        Command::Roc(a) => commands::roc(a),
    };
    match outcome {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e.chain().any(|c| matches!(c.downcast_ref(), Some(weightflow::Error::Numerical(_))));
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}
