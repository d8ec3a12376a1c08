//! `ddsvr` — epsilon-SVR with a data-driven insensitive parameter.
//!
//! Subcommands: `simulate` (Monte-Carlo grids from a config file), `fit`
//! (train and persist a model), `predict` (apply a saved model), `bench`
//! (repeated-split case studies on a CSV), and `curve` (likelihood-surface
//! export). Exit status: 0 success, 2 validation error, 3 computation
//! error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ddsvr", version, about = "Support vector regression with a data-driven tube")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation grid described by a config file.
    Simulate {
        /// Config file (see the documented `ddsvr-sim v1` format).
        #[arg(long)]
        config: PathBuf,
        /// Report CSV path; a `-summary` CSV and a `.meta.txt` sidecar are
        /// written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method on a CSV and save the model.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Target column name (default: last column).
        #[arg(long)]
        target: Option<String>,
        /// tuning | cm | kcv | dd
        #[arg(long, default_value = "dd")]
        method: String,
        /// linear | rbf
        #[arg(long, default_value = "rbf")]
        kernel: String,
        /// RBF width (default 1/d).
        #[arg(long)]
        gamma: Option<f64>,
        /// Pilot regularization.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Seed for cross-validation folds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict targets for a CSV of feature rows with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeated-split benchmark on a local CSV (the case-study protocol).
    Bench {
        #[arg(long)]
        data: PathBuf,
        /// Target column name (default: last column).
        #[arg(long)]
        target: Option<String>,
        /// Comma-separated subset of tuning,cm,kcv,dd.
        #[arg(long, default_value = "tuning,cm,kcv,dd")]
        methods: String,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        /// Training fraction of each split.
        #[arg(long, default_value_t = 0.7)]
        split: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// linear | rbf
        #[arg(long, default_value = "rbf")]
        kernel: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export likelihood-surface data (epsilon, s, neg_log_lik) as CSV.
    Curve {
        /// One-column CSV of residuals (header required).
        #[arg(long, conflicts_with = "data")]
        residuals: Option<PathBuf>,
        /// Dataset CSV; residuals come from an epsilon = 0 pilot fit.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value = "rbf")]
        kernel: String,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        #[arg(long)]
        eps_min: Option<f64>,
        #[arg(long)]
        eps_max: Option<f64>,
        #[arg(long, default_value_t = 41)]
        eps_steps: usize,
        #[arg(long)]
        s_min: Option<f64>,
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long, default_value_t = 41)]
        s_steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { config, out } => commands::simulate(config, out),
        Command::Fit { data, target, method, kernel, gamma, c, seed, out } => {
            commands::fit(data, target.as_deref(), method, kernel, *gamma, *c, *seed, out)
        }
        Command::Predict { model, data, out } => commands::predict(model, data, out),
        Command::Bench { data, target, methods, reps, split, seed, kernel, gamma, c, out } => {
            commands::bench(
                data,
                target.as_deref(),
                methods,
                *reps,
                *split,
                *seed,
                kernel,
                *gamma,
                *c,
                out,
            )
        }
        Command::Curve {
            residuals,
            data,
            target,
            kernel,
            gamma,
            c,
            eps_min,
            eps_max,
            eps_steps,
            s_min,
            s_max,
            s_steps,
            out,
        } => commands::curve(
            residuals.as_deref(),
            data.as_deref(),
            target.as_deref(),
            kernel,
            *gamma,
            *c,
            (*eps_min, *eps_max, *eps_steps),
            (*s_min, *s_max, *s_steps),
            out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
