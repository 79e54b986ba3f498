//! Miniature end-to-end run of every pipeline stage into a temp directory.
//! The `sideslip` binary drives the same stages from the command line.
//!
//! Run with: `cargo run --release --example full_pipeline`

use sideslip::pipeline::{format_report, load_report, run_pipeline, RunConfig, RunDir, Stage};

fn main() -> sideslip::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.seed = 11;
    cfg.sim.hours = 0.1; // six minutes of driving
    cfg.ml.epochs = 4;
    cfg.ml.train_stride = 16;
    cfg.fusion.df_epochs = 120;
    cfg.fusion.gmm_k_candidates = vec![2, 4];

    let dir = std::env::temp_dir().join("sideslip_demo_run");
    if dir.exists() {
        std::fs::remove_dir_all(&dir).ok();
    }
    run_pipeline(&cfg, &Stage::ORDER, &dir)?;

    let report = load_report(&RunDir::new(&dir))?;
    println!("\n{}", format_report(&report));
    println!("artifacts in {}", dir.display());
    Ok(())
}
