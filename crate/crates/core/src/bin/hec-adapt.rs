use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hec_adapt::cli;
use hec_adapt::config::{Overrides, RunConfig};
use hec_adapt::sim::Scheme;

/// Adaptive anomaly detection across IoT, edge and cloud tiers.
#[derive(Parser, Debug)]
#[command(name = "hec-adapt", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Delay cost weight (overrides the file).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Output directory (overrides the file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic series and day labels.
    GenData,
    /// Train AE-IoT, AE-Edge and AE-Cloud on the normal training weeks.
    TrainDetectors,
    /// Train the tier-selection policy.
    TrainPolicy,
    /// Compare schemes and write reports.
    Evaluate {
        /// Schemes to run, e.g. ae-iot, successive-2, adaptive. All six by default.
        #[arg(long, value_delimiter = ',')]
        schemes: Vec<String>,
    },
    /// Retrain the policy for each alpha and tabulate accuracy and delay.
    SweepAlpha {
        /// Comma-separated alpha values; nine points over the default range otherwise.
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
    },
}

fn run(args: Cli) -> hec_adapt::Result<()> {
    let overrides = Overrides {
        seed: args.common.seed,
        alpha: args.common.alpha,
        out_dir: args.common.out,
    };
    let cfg = RunConfig::load(args.common.config.as_deref(), &overrides)?;
    match args.command {
        Command::GenData => {
            cli::gen_data(&cfg)?;
        }
        Command::TrainDetectors => {
            cli::train_detectors(&cfg)?;
        }
        Command::TrainPolicy => {
            cli::train_policy_cmd(&cfg)?;
        }
        Command::Evaluate { schemes } => {
            let schemes = schemes
                .iter()
                .map(|s| s.parse::<Scheme>())
                .collect::<hec_adapt::Result<Vec<_>>>()?;
            let out = cli::evaluate(&cfg, &schemes)?;
            println!("scheme,f1,accuracy_pct,total_reward,avg_delay_ms");
            for r in &out.all_weeks {
                println!(
                    "{},{:.3},{:.2},{:.3},{:.3}",
                    r.scheme,
                    r.metrics.f1,
                    100.0 * r.metrics.accuracy,
                    r.total_reward,
                    r.avg_delay_ms
                );
            }
        }
        Command::SweepAlpha { alphas } => {
            let alphas = if alphas.is_empty() {
                cli::default_alpha_grid()
            } else {
                alphas
            };
            let rows = cli::sweep_alpha(&cfg, &alphas)?;
            println!("alpha,accuracy_pct,avg_delay_ms");
            for r in rows {
                println!("{},{:.2},{:.3}", r.alpha, r.accuracy_pct, r.avg_delay_ms);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
