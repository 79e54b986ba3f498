//! Pipeline orchestration: stage chaining, artifact layout, input hashing
//! and the reproducibility contract (same config, same seed, same bytes).

mod config;
mod stages;

pub use config::{
    FusionSection, KfSection, MlSection, NoiseSection, RunConfig, SimSection, WindowSection,
};
pub use stages::{
    format_report, load_calibration, load_fusion_rows, load_report, load_train_log,
    run_pipeline, select_trace_scenario, stage_ablate, stage_build_fusion, stage_evaluate,
    stage_simulate, stage_train_df, stage_train_gf, stage_train_ml,
    stage_validate_hypothesis, RunDir, Stage, MODEL_NAMES,
};
