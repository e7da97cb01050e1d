use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use diamond_cli::config::ExperimentConfig;
use diamond_cli::runner::{
    load_experiment, predict_with_bundle, run_baseline, run_baseline_comparison, run_experiment,
    run_sweep, SweepAxis,
};
use diamond_cli::CliError;
use diamond_core::pipeline::BaselineKind;

/// Diamond feature-learning experiment harness.
#[derive(Parser)]
#[command(name = "diamond", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline experiment described by a config file.
    Run {
        /// Path to the experiment config (TOML).
        #[arg(short, long)]
        config: PathBuf,
    },
    /// Run an ablation baseline under the same folds as the full run.
    Baseline {
        #[arg(short, long)]
        config: PathBuf,
        /// One of: svm_raw, l1_only, wlpdp_only, fssae_only, all.
        #[arg(short, long)]
        kind: String,
    },
    /// Sweep one parameter axis under a fixed fold plan.
    Sweep {
        #[arg(short, long)]
        config: PathBuf,
        /// "rho" or "lambda-beta".
        #[arg(short, long)]
        axis: String,
        /// Comma-separated rho values (rho axis).
        #[arg(long)]
        values: Option<String>,
        /// Comma-separated lambda values (lambda-beta axis).
        #[arg(long)]
        lambdas: Option<String>,
        /// Comma-separated beta values (lambda-beta axis).
        #[arg(long)]
        betas: Option<String>,
    },
    /// Score a CSV with a saved model bundle.
    Predict {
        /// Saved fold model (models/fold_N.json from a run).
        #[arg(short, long)]
        model: PathBuf,
        /// CSV to score.
        #[arg(short, long)]
        data: PathBuf,
        /// Schema describing the CSV.
        #[arg(short, long)]
        schema: PathBuf,
        /// Where to write the predictions CSV.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Parse and validate a config file without running anything.
    ValidateConfig {
        #[arg(short, long)]
        config: PathBuf,
    },
}

fn parse_values(text: &str, field: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("{field}: bad value {t:?}: {e}")))
        })
        .collect()
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let exp = load_experiment(ExperimentConfig::load(&config)?)?;
            let artifacts = run_experiment(&exp)?;
            println!("{}", artifacts.table);
            println!("reports written to {}", artifacts.out_dir.display());
        }
        Command::Baseline { config, kind } => {
            let exp = load_experiment(ExperimentConfig::load(&config)?)?;
            if kind == "all" {
                let table = run_baseline_comparison(&exp)?;
                println!("{table}");
            } else {
                let parsed = BaselineKind::parse(&kind).ok_or_else(|| {
                    CliError::Config(format!(
                        "unknown baseline {kind:?}; expected svm_raw, l1_only, wlpdp_only, fssae_only, or all"
                    ))
                })?;
                let (_, table) = run_baseline(&exp, parsed)?;
                println!("{table}");
            }
        }
        Command::Sweep {
            config,
            axis,
            values,
            lambdas,
            betas,
        } => {
            let exp = load_experiment(ExperimentConfig::load(&config)?)?;
            let axis = match axis.as_str() {
                "rho" => SweepAxis::Rho {
                    values: parse_values(
                        values
                            .as_deref()
                            .ok_or_else(|| CliError::Config("rho sweep needs --values".into()))?,
                        "--values",
                    )?,
                },
                "lambda-beta" => SweepAxis::LambdaBeta {
                    lambdas: parse_values(
                        lambdas.as_deref().ok_or_else(|| {
                            CliError::Config("lambda-beta sweep needs --lambdas".into())
                        })?,
                        "--lambdas",
                    )?,
                    betas: parse_values(
                        betas.as_deref().ok_or_else(|| {
                            CliError::Config("lambda-beta sweep needs --betas".into())
                        })?,
                        "--betas",
                    )?,
                },
                other => {
                    return Err(CliError::Config(format!(
                        "unknown sweep axis {other:?}; expected rho or lambda-beta"
                    )))
                }
            };
            let path = run_sweep(&exp, &axis)?;
            println!("sweep series written to {}", path.display());
        }
        Command::Predict {
            model,
            data,
            schema,
            output,
        } => {
            let accuracy = predict_with_bundle(&model, &data, &schema, &output)?;
            println!("predictions written to {}", output.display());
            if let Some(acc) = accuracy {
                println!("accuracy against provided labels: {:.2}%", acc * 100.0);
            }
        }
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("OK: {} ({} validated)", cfg.name, config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
