//! Command-line front end: parses arguments, loads the run configuration
//! and delegates to the pipeline stages. All logic lives in the library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sideslip::error::Result;
use sideslip::pipeline::{
    format_report, run_pipeline, stage_ablate, stage_build_fusion, stage_evaluate,
    stage_simulate, stage_train_df, stage_train_gf, stage_train_ml,
    stage_validate_hypothesis, RunConfig, RunDir, Stage,
};
use sideslip::sim::ManeuverMix;

/// Environment variable naming the default run-directory root.
const RUN_ROOT_ENV: &str = "SIDESLIP_RUN_ROOT";

#[derive(Parser)]
#[command(
    name = "sideslip",
    about = "Virtual sideslip-angle sensor: simulation, training, fusion and evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run directory holding every artifact of this experiment.
    /// Defaults to $SIDESLIP_RUN_ROOT or ./runs/default.
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,

    /// Run configuration file (TOML). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic driving dataset.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Output directory for the dataset (defaults to <run-dir>/data).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Hours of driving to generate.
        #[arg(long)]
        hours: Option<f64>,
        /// Maneuver weights, e.g. "slalom=0.3,figure_eight=0.2".
        #[arg(long)]
        mix: Option<String>,
    },
    /// Train the sequence model.
    TrainMl {
        #[command(flatten)]
        common: Common,
        /// Dataset directory (defaults to <run-dir>/data).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint output path (defaults to <run-dir>/checkpoints/ml.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit filter noise and build the aligned fusion datasets.
    BuildFusion {
        #[command(flatten)]
        common: Common,
    },
    /// Train the deep fuser.
    TrainDf {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the Gaussian-mixture fuser.
    TrainGf {
        #[command(flatten)]
        common: Common,
    },
    /// Score every model on the test split and write the report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Sequence-model checkpoint (defaults inside the run directory).
        #[arg(long)]
        ckpt_ml: Option<PathBuf>,
        /// Deep-fusion checkpoint.
        #[arg(long)]
        ckpt_df: Option<PathBuf>,
        /// Mixture-fusion checkpoint.
        #[arg(long)]
        ckpt_gf: Option<PathBuf>,
        /// Dataset directory.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Report output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Check the residual-correlation hypothesis on the test split.
    ValidateHypothesis {
        #[command(flatten)]
        common: Common,
    },
    /// Refit the deep fuser on branch subsets.
    Ablate {
        #[command(flatten)]
        common: Common,
    },
    /// Run a subset of stages (default: the full pipeline) in order.
    Run {
        #[command(flatten)]
        common: Common,
        /// Comma-separated stage list, e.g. "simulate,train-ml".
        #[arg(long)]
        stages: Option<String>,
    },
}

fn effective_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_root(common: &Common) -> PathBuf {
    common
        .run_dir
        .clone()
        .or_else(|| std::env::var_os(RUN_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs/default"))
}

/// When an explicit dataset directory is given, treat its parent as the run
/// root so the artifact layout stays consistent.
fn redirect(data: Option<PathBuf>, dirs: &RunDir) -> RunDir {
    match data {
        Some(d) if d != dirs.data_dir() => {
            let root = d.parent().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("."));
            RunDir::new(root)
        }
        _ => dirs.clone(),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let common = match &cli.command {
        Command::Simulate { common, .. }
        | Command::TrainMl { common, .. }
        | Command::BuildFusion { common }
        | Command::TrainDf { common }
        | Command::TrainGf { common }
        | Command::Evaluate { common, .. }
        | Command::ValidateHypothesis { common }
        | Command::Ablate { common }
        | Command::Run { common, .. } => common.clone(),
    };
    let mut cfg = effective_config(&common)?;
    if common.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let dirs = RunDir::new(run_root(&common));

    match cli.command {
        Command::Simulate { out, hours, mix, .. } => {
            if let Some(h) = hours {
                cfg.sim.hours = h;
            }
            if let Some(m) = &mix {
                cfg.sim.mix = ManeuverMix::parse(m)?;
            }
            cfg.validate()?;
            let dirs = redirect(out, &dirs);
            stage_simulate(&cfg, &dirs)?;
            println!("dataset written to {}", dirs.data_dir().display());
        }
        Command::TrainMl { data, out, .. } => {
            let dirs = redirect(data, &dirs);
            stage_train_ml(&cfg, &dirs)?;
            let ckpt = dirs.ckpt_ml();
            if let Some(target) = out {
                if target != ckpt {
                    if let Some(parent) = target.parent() {
                        if !parent.as_os_str().is_empty() {
                            std::fs::create_dir_all(parent).map_err(|e| {
                                sideslip::Error::io(parent.display().to_string(), e)
                            })?;
                        }
                    }
                    std::fs::copy(&ckpt, &target)
                        .map_err(|e| sideslip::Error::io(target.display().to_string(), e))?;
                }
            }
            println!("checkpoint written to {}", ckpt.display());
        }
        Command::BuildFusion { .. } => stage_build_fusion(&cfg, &dirs)?,
        Command::TrainDf { .. } => stage_train_df(&cfg, &dirs)?,
        Command::TrainGf { .. } => stage_train_gf(&cfg, &dirs)?,
        Command::Evaluate { data, .. } => {
            let dirs = redirect(data, &dirs);
            let report = stage_evaluate(&cfg, &dirs)?;
            print!("{}", format_report(&report));
            println!("report written to {}", dirs.report_dir().display());
        }
        Command::ValidateHypothesis { .. } => {
            let stats = stage_validate_hypothesis(&cfg, &dirs)?;
            println!(
                "residual correlation r = {:.4}, t* = {:.1}, n = {}, p = {:.3e} -> {}",
                stats.r,
                stats.t_star,
                stats.n,
                stats.p_value,
                if stats.reject_at_99 {
                    "independence rejected at 99%"
                } else {
                    "no rejection"
                }
            );
        }
        Command::Ablate { .. } => {
            let rows = stage_ablate(&cfg, &dirs)?;
            println!("subset    MAE(deg)  ME(deg)");
            for r in rows {
                println!(
                    "{:<9} {:<9.4} {:<9.4}",
                    r.subset, r.metrics.mae_deg, r.metrics.me_deg
                );
            }
        }
        Command::Run { stages, .. } => {
            let list: Vec<Stage> = match stages {
                None => Stage::ORDER.to_vec(),
                Some(s) => s
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| Stage::parse(p.trim()))
                    .collect::<Result<_>>()?,
            };
            run_pipeline(&cfg, &list, &dirs.root)?;
            println!("pipeline finished; artifacts in {}", dirs.root.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
