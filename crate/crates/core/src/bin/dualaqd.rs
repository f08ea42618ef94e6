use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dualaqd::bench::{self, ExperimentConfig, Setting};

/// Prediction intervals for neural-network regression.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Worker threads for folds, methods and ensemble members (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// key = value experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic sinusoid dataset with its ideal bounds.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross-validate one method.
    Run {
        #[command(flatten)]
        common: Common,
        /// dualaqd, dualaqd_nobs, qd, qdplus or mcdropout_pi.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Cross-validate several methods on shared folds and t-test the winner.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated method list.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Grid search over the adaptive coefficient's learning rate.
    Gridsearch {
        #[command(flatten)]
        common: Common,
        /// Comma-separated candidate list.
        #[arg(long)]
        alpha: Option<String>,
    },
}

fn flag(settings: &mut Vec<Setting>, name: &str, key: &str, value: Option<String>) {
    if let Some(v) = value {
        settings.push(Setting::new(format!("--{name}"), key, v));
    }
}

fn execute(cli: Cli) -> dualaqd::Result<()> {
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| dualaqd::Error::Config(format!("cannot start {jobs} workers: {e}")))?;
    }
    let mut o = Vec::new();
    let (cfg_path, data, out, run): (_, _, _, fn(&ExperimentConfig, &std::path::Path, &std::path::Path) -> _) =
        match cli.command {
            Command::Synth { config, out, seed } => {
                flag(&mut o, "seed", "data_seed", seed.map(|s| s.to_string()));
                let cfg = ExperimentConfig::load(config.as_deref(), &o)?;
                let d = bench::cmd_synth(&cfg.synthetic, &out)?;
                println!("wrote {} rows to {}", d.len(), out.display());
                return Ok(());
            }
            Command::Run { common, method, alpha } => {
                flag(&mut o, "seed", "seed", common.seed.map(|s| s.to_string()));
                flag(&mut o, "method", "loss_kind", method);
                flag(&mut o, "alpha", "alpha", alpha.map(|a| a.to_string()));
                (common.config, common.data, common.out, bench::cmd_run)
            }
            Command::Compare { common, method, alpha } => {
                flag(&mut o, "seed", "seed", common.seed.map(|s| s.to_string()));
                flag(&mut o, "method", "methods", method);
                flag(&mut o, "alpha", "alpha", alpha.map(|a| a.to_string()));
                (common.config, common.data, common.out, bench::cmd_compare)
            }
            Command::Gridsearch { common, alpha } => {
                flag(&mut o, "seed", "seed", common.seed.map(|s| s.to_string()));
                flag(&mut o, "alpha", "alphas", alpha);
                (common.config, common.data, common.out, bench::cmd_gridsearch)
            }
        };
    let cfg = ExperimentConfig::load(cfg_path.as_deref(), &o)?;
    let manifest = run(&cfg, &data, &out)?;
    print!("{}", bench::format_summary(&manifest));
    println!("artifacts in {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
