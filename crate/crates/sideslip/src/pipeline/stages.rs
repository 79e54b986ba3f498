//! The pipeline stages and their artifact contracts.
//!
//! Every stage reads from and writes into one run directory:
//!
//! ```text
//! <run>/config.toml            exact configuration echo
//! <run>/hashes.json            sha256 of every written artifact
//! <run>/data/                  scenario CSVs + manifest.json
//! <run>/checkpoints/           ml.json kf.json df.json gf.json calibration.json
//! <run>/fusion/                {train,val,test}.csv + *_rows.json
//! <run>/report/                metrics.json, tables, traces, hypothesis.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::data::{
    load_dataset, make_windows, scenario_split, write_dataset, FusionInput, Maneuver, Scenario,
    Window,
};
use crate::error::{Error, Result};
use crate::eval::svg::{line_plot, Series};
use crate::eval::{
    binned_mae_curve, compute_metrics, conditional_bins, run_ablation, write_trace_csv,
    AblationRow, Condition, ConditionRow, CorrelationStats, MetricReport, ModelCurve,
    ModelMetrics, TraceSeries,
};
use crate::fusion::deep::{load_df, save_df};
use crate::fusion::gmr::{joint_matrix, load_gf, save_gf, GaussianFusion};
use crate::fusion::{
    build_fusion_dataset, em_fit, expert_fuse, gf_predict, train_df, write_fusion_csv,
    FeatureNorm, FusionRow, UncertaintyCalibration,
};
use crate::ml::checkpoint::{read_json, write_json, CHECKPOINT_VERSION};
use crate::ml::{load_checkpoint, save_checkpoint, train_ml, Model, TrainLog};
use crate::sim::generate_dataset;
use crate::vmm::{
    collect_residuals_vmm1, estimate_measurement_noise, fit_process_noise, KfConfig,
};
use crate::eval::residual_correlation;
use crate::RAD2DEG;

pub const MODEL_NAMES: [&str; 6] = ["ml", "vmm1", "vmm2", "ef", "df", "gf"];
const BIN_WIDTH_DEG: f64 = 0.125;

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Simulate,
    TrainMl,
    BuildFusion,
    TrainDf,
    TrainGf,
    Evaluate,
    ValidateHypothesis,
    Ablate,
}

impl Stage {
    pub const ORDER: [Stage; 8] = [
        Stage::Simulate,
        Stage::TrainMl,
        Stage::BuildFusion,
        Stage::TrainDf,
        Stage::TrainGf,
        Stage::Evaluate,
        Stage::ValidateHypothesis,
        Stage::Ablate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::TrainMl => "train-ml",
            Stage::BuildFusion => "build-fusion",
            Stage::TrainDf => "train-df",
            Stage::TrainGf => "train-gf",
            Stage::Evaluate => "evaluate",
            Stage::ValidateHypothesis => "validate-hypothesis",
            Stage::Ablate => "ablate",
        }
    }

    pub fn parse(s: &str) -> Result<Stage> {
        Stage::ORDER
            .iter()
            .copied()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Paths inside one run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn hashes(&self) -> PathBuf {
        self.root.join("hashes.json")
    }
    pub fn data_dir(&self) -> PathBuf {
        self.root.join("data")
    }
    pub fn ckpt_ml(&self) -> PathBuf {
        self.root.join("checkpoints/ml.json")
    }
    pub fn ml_train_log(&self) -> PathBuf {
        self.root.join("checkpoints/ml_train_log.json")
    }
    pub fn ckpt_kf(&self) -> PathBuf {
        self.root.join("checkpoints/kf.json")
    }
    pub fn ckpt_df(&self) -> PathBuf {
        self.root.join("checkpoints/df.json")
    }
    pub fn ckpt_gf(&self) -> PathBuf {
        self.root.join("checkpoints/gf.json")
    }
    pub fn calibration(&self) -> PathBuf {
        self.root.join("checkpoints/calibration.json")
    }
    pub fn fusion_csv(&self, split: &str) -> PathBuf {
        self.root.join(format!("fusion/{split}.csv"))
    }
    pub fn fusion_rows(&self, split: &str) -> PathBuf {
        self.root.join(format!("fusion/{split}_rows.json"))
    }
    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
    pub fn metrics_json(&self) -> PathBuf {
        self.report_dir().join("metrics.json")
    }
    pub fn hypothesis_json(&self) -> PathBuf {
        self.report_dir().join("hypothesis.json")
    }

    fn require(&self, path: PathBuf, stage: &str) -> Result<PathBuf> {
        if !path.exists() {
            return Err(Error::MissingArtifact {
                stage: stage.into(),
                path: path.display().to_string(),
            });
        }
        Ok(path)
    }
}

/// Writes (or verifies) the configuration echo in the run directory.
fn ensure_config_echo(cfg: &RunConfig, dirs: &RunDir) -> Result<()> {
    let text = cfg.to_toml();
    let path = dirs.config();
    if path.exists() {
        let existing =
            fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))?;
        if existing != text {
            return Err(Error::Config(format!(
                "run directory {} was produced by a different configuration; \
                 use a fresh directory or the original config",
                dirs.root.display()
            )));
        }
        return Ok(());
    }
    fs::create_dir_all(&dirs.root).map_err(|e| Error::io(dirs.root.display().to_string(), e))?;
    fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

fn record_hashes(dirs: &RunDir, paths: &[PathBuf]) -> Result<()> {
    let hashes_path = dirs.hashes();
    let mut map: BTreeMap<String, String> = if hashes_path.exists() {
        read_json(&hashes_path)?
    } else {
        BTreeMap::new()
    };
    for p in paths {
        let bytes = fs::read(p).map_err(|e| Error::io(p.display().to_string(), e))?;
        let digest = Sha256::digest(&bytes);
        let rel = p
            .strip_prefix(&dirs.root)
            .unwrap_or(p)
            .to_string_lossy()
            .replace('\\', "/");
        map.insert(rel, hex_string(&digest));
    }
    write_json(&hashes_path, &map)
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn load_splits(
    cfg: &RunConfig,
    dirs: &RunDir,
    stage: &str,
) -> Result<(Vec<Scenario>, Vec<Scenario>, Vec<Scenario>)> {
    dirs.require(dirs.data_dir().join("manifest.json"), stage)?;
    let scenarios = load_dataset(&dirs.data_dir())?;
    scenario_split(scenarios, cfg.split, cfg.split_seed())
}

/// Stride-subsampled windows for training; evaluation keeps stride one.
fn windows_with_stride(
    scenarios: &[Scenario],
    cfg: &RunConfig,
    stride: usize,
) -> Result<Vec<Window>> {
    let wcfg = cfg.window_config();
    let mut out = Vec::new();
    for s in scenarios {
        let windows = make_windows(s, &wcfg)?;
        out.extend(
            windows
                .into_iter()
                .enumerate()
                .filter(|(i, _)| i % stride == 0)
                .map(|(_, w)| w),
        );
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct KfCheckpoint {
    version: u32,
    kind: String,
    config: KfConfig,
    val_mae_deg: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationArtifact {
    version: u32,
    kind: String,
    calibration: UncertaintyCalibration,
}

#[derive(Debug, Serialize, Deserialize)]
struct FusionRowsArtifact {
    version: u32,
    kind: String,
    split: String,
    rows: Vec<FusionRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GfSelection {
    version: u32,
    candidates: Vec<usize>,
    val_log_likelihood: Vec<f64>,
    chosen_k: usize,
}

/// Generates the synthetic dataset into `data/`.
pub fn stage_simulate(cfg: &RunConfig, dirs: &RunDir) -> Result<()> {
    ensure_config_echo(cfg, dirs)?;
    let scenarios = generate_dataset(&cfg.sim_config())?;
    write_dataset(&scenarios, &dirs.data_dir())?;
    let mut written: Vec<PathBuf> = scenarios
        .iter()
        .map(|s| dirs.data_dir().join(format!("{}.csv", s.id)))
        .collect();
    written.push(dirs.data_dir().join("manifest.json"));
    record_hashes(dirs, &written)?;
    log::info!("simulate: {} scenarios written", scenarios.len());
    Ok(())
}

/// Trains the sequence model on the training split.
pub fn stage_train_ml(cfg: &RunConfig, dirs: &RunDir) -> Result<()> {
    ensure_config_echo(cfg, dirs)?;
    let (train, val, _) = load_splits(cfg, dirs, "train-ml")?;
    let train_windows = windows_with_stride(&train, cfg, cfg.ml.train_stride)?;
    let val_windows = windows_with_stride(&val, cfg, cfg.ml.val_stride)?;
    log::info!(
        "train-ml: {} training windows (stride {}), {} validation windows",
        train_windows.len(),
        cfg.ml.train_stride,
        val_windows.len()
    );
    let mut model = Model::new(cfg.model_config())?;
    let (log, adam) = train_ml(&mut model, &train_windows, &val_windows, &cfg.train_options())?;
    save_checkpoint(&dirs.ckpt_ml(), &model, Some(&adam), cfg.seed)?;
    write_json(&dirs.ml_train_log(), &log)?;
    record_hashes(dirs, &[dirs.ckpt_ml(), dirs.ml_train_log()])?;
    Ok(())
}

/// Fits the wheel-speed filter noise, runs every branch over every split
/// and writes the aligned fusion datasets plus the uncertainty calibration.
pub fn stage_build_fusion(cfg: &RunConfig, dirs: &RunDir) -> Result<()> {
    ensure_config_echo(cfg, dirs)?;
    let ml_path = dirs.require(dirs.ckpt_ml(), "build-fusion")?;
    let (model, _, _) = load_checkpoint(&ml_path)?;
    let (train, val, test) = load_splits(cfg, dirs, "build-fusion")?;

    let r = estimate_measurement_noise(&train)?;
    let (kf_cfg, val_mae) =
        fit_process_noise(&cfg.sim.geometry, 50.0, r, &cfg.q_grid(), &val)?;
    write_json(
        &dirs.ckpt_kf(),
        &KfCheckpoint {
            version: CHECKPOINT_VERSION,
            kind: "kf".into(),
            config: kf_cfg.clone(),
            val_mae_deg: val_mae,
        },
    )?;

    let wcfg = cfg.window_config();
    let mut written = vec![dirs.ckpt_kf()];
    let mut val_deltas: Vec<f64> = Vec::new();
    for (name, scenarios) in [("train", &train), ("val", &val), ("test", &test)] {
        let rows = build_fusion_dataset(&model, &kf_cfg, &cfg.sim.geometry, scenarios, &wcfg)?;
        if name == "val" {
            val_deltas = rows.iter().map(|r| r.input.delta_ml).collect();
        }
        write_fusion_csv(&rows, &dirs.fusion_csv(name))?;
        write_json(
            &dirs.fusion_rows(name),
            &FusionRowsArtifact {
                version: CHECKPOINT_VERSION,
                kind: "fusion-rows".into(),
                split: name.into(),
                rows,
            },
        )?;
        written.push(dirs.fusion_csv(name));
        written.push(dirs.fusion_rows(name));
    }

    let calibration = UncertaintyCalibration::fit(&val_deltas)?;
    write_json(
        &dirs.calibration(),
        &CalibrationArtifact {
            version: CHECKPOINT_VERSION,
            kind: "calibration".into(),
            calibration,
        },
    )?;
    written.push(dirs.calibration());
    record_hashes(dirs, &written)?;
    Ok(())
}

fn load_rows(dirs: &RunDir, split: &str, stage: &str) -> Result<Vec<FusionRow>> {
    let path = dirs.require(dirs.fusion_rows(split), stage)?;
    let artifact: FusionRowsArtifact = read_json(&path)?;
    Ok(artifact.rows)
}

/// Reads one split's aligned fusion rows from a run directory.
pub fn load_fusion_rows(dirs: &RunDir, split: &str) -> Result<Vec<FusionRow>> {
    load_rows(dirs, split, "load-fusion-rows")
}

/// Reads the fitted uncertainty calibration from a run directory.
pub fn load_calibration(dirs: &RunDir) -> Result<UncertaintyCalibration> {
    let artifact: CalibrationArtifact = read_json(&dirs.calibration())?;
    Ok(artifact.calibration)
}

/// Picks the scenario whose trace should be exported for a maneuver class.
/// Absent maneuvers are a lookup error.
pub fn select_trace_scenario(rows: &[FusionRow], maneuver: Maneuver) -> Result<String> {
    rows.iter()
        .find(|r| r.maneuver == maneuver)
        .map(|r| r.scenario_id.clone())
        .ok_or_else(|| Error::Lookup {
            what: format!("{maneuver} scenario in the test split"),
        })
}

/// Trains the deep fuser on the fusion dataset.
pub fn stage_train_df(cfg: &RunConfig, dirs: &RunDir) -> Result<()> {
    ensure_config_echo(cfg, dirs)?;
    let train = load_rows(dirs, "train", "train-df")?;
    let val = load_rows(dirs, "val", "train-df")?;
    let (df, _) = train_df(&train, &val, &cfg.df_options())?;
    save_df(&dirs.ckpt_df(), &df)?;
    record_hashes(dirs, &[dirs.ckpt_df()])?;
    Ok(())
}

/// Fits the joint mixture, selecting the component count on validation
/// likelihood when configured.
pub fn stage_train_gf(cfg: &RunConfig, dirs: &RunDir) -> Result<()> {
    ensure_config_echo(cfg, dirs)?;
    let train = load_rows(dirs, "train", "train-gf")?;
    let val = load_rows(dirs, "val", "train-gf")?;

    let norm = FeatureNorm::fit(&train.iter().map(|r| r.input).collect::<Vec<_>>())?;
    let pairs = |rows: &[FusionRow]| rows.iter().map(|r| (r.input, r.y)).collect::<Vec<_>>();
    let train_m = joint_matrix(&pairs(&train), &norm);
    let val_m = joint_matrix(&pairs(&val), &norm);

    let candidates: Vec<usize> = if cfg.fusion.gmm_select_k {
        cfg.fusion.gmm_k_candidates.clone()
    } else {
        vec![cfg.fusion.gmm_k]
    };
    let mut best: Option<(usize, f64, crate::fusion::GmmModel)> = None;
    let mut lls = Vec::with_capacity(candidates.len());
    for &k in &candidates {
        let (model, _) = em_fit(&train_m, &cfg.em_options(k))?;
        let ll = model.mean_log_likelihood(&val_m)?;
        lls.push(ll);
        let better = best.as_ref().map_or(true, |(_, b, _)| ll > *b);
        if better {
            best = Some((k, ll, model));
        }
    }
    let (chosen_k, _, gmm) = best.expect("non-empty candidate list");
    log::info!("train-gf: chose K = {chosen_k}");
    save_gf(&dirs.ckpt_gf(), &GaussianFusion { gmm, norm })?;
    write_json(
        &dirs.report_dir().join("gf_selection.json"),
        &GfSelection {
            version: CHECKPOINT_VERSION,
            candidates,
            val_log_likelihood: lls,
            chosen_k,
        },
    )?;
    record_hashes(dirs, &[dirs.ckpt_gf(), dirs.report_dir().join("gf_selection.json")])?;
    Ok(())
}

/// Everything evaluate needs per model: predictions aligned with rows.
struct TestPredictions {
    rows: Vec<FusionRow>,
    by_model: Vec<Vec<f64>>,
}

fn predict_all(cfg: &RunConfig, dirs: &RunDir, stage: &str) -> Result<TestPredictions> {
    let rows = load_rows(dirs, "test", stage)?;
    let cal_path = dirs.require(dirs.calibration(), stage)?;
    let cal: CalibrationArtifact = read_json(&cal_path)?;
    let df = load_df(&dirs.require(dirs.ckpt_df(), stage)?)?;
    let gf = load_gf(&dirs.require(dirs.ckpt_gf(), stage)?)?;
    let ef_cfg = cfg.expert_config();

    let mut by_model: Vec<Vec<f64>> = vec![Vec::with_capacity(rows.len()); 6];
    let df_preds = df.predict_batch(&rows.iter().map(|r| r.input).collect::<Vec<_>>());
    for (i, row) in rows.iter().enumerate() {
        by_model[0].push(row.input.beta_ml);
        by_model[1].push(row.input.beta_vm1);
        by_model[2].push(row.input.beta_vm2);
        let normalized = FusionInput {
            delta_ml: cal.calibration.normalize(row.input.delta_ml),
            ..row.input
        };
        by_model[3].push(expert_fuse(&normalized, row.v_s, &ef_cfg));
        by_model[4].push(df_preds[i]);
        by_model[5].push(gf_predict(&gf, &row.input)?);
    }
    Ok(TestPredictions { rows, by_model })
}

/// Scores every model on the test split and writes the report artifacts.
pub fn stage_evaluate(cfg: &RunConfig, dirs: &RunDir) -> Result<MetricReport> {
    ensure_config_echo(cfg, dirs)?;
    let preds = predict_all(cfg, dirs, "evaluate")?;
    let gt: Vec<f64> = preds.rows.iter().map(|r| r.y).collect();

    let models: Vec<ModelMetrics> = MODEL_NAMES
        .iter()
        .zip(&preds.by_model)
        .map(|(name, p)| {
            Ok(ModelMetrics {
                model: name.to_string(),
                metrics: compute_metrics(p, &gt)?,
            })
        })
        .collect::<Result<_>>()?;

    let v_s: Vec<f64> = preds.rows.iter().map(|r| r.v_s).collect();
    let a_y: Vec<f64> = preds.rows.iter().map(|r| r.a_y).collect();
    let masks = conditional_bins(&v_s, &a_y);
    let mut conditions = Vec::with_capacity(4);
    for (mask, cond) in masks.iter().zip(Condition::ALL) {
        let idx: Vec<usize> =
            mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect();
        let mut mae = Vec::with_capacity(6);
        for p in &preds.by_model {
            if idx.is_empty() {
                mae.push(None);
            } else {
                let sel_p: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
                let sel_g: Vec<f64> = idx.iter().map(|&i| gt[i]).collect();
                mae.push(Some(compute_metrics(&sel_p, &sel_g)?.mae_deg));
            }
        }
        conditions.push(ConditionRow {
            condition: cond.label().to_string(),
            count: idx.len(),
            mae_deg: mae,
        });
    }

    let curves: Vec<ModelCurve> = MODEL_NAMES
        .iter()
        .zip(&preds.by_model)
        .map(|(name, p)| {
            Ok(ModelCurve {
                model: name.to_string(),
                bins: binned_mae_curve(p, &gt, BIN_WIDTH_DEG)?,
            })
        })
        .collect::<Result<_>>()?;

    let report = MetricReport {
        sample_count: preds.rows.len(),
        models,
        conditions,
        curves,
        hypothesis: None,
    };

    let rdir = dirs.report_dir();
    fs::create_dir_all(&rdir).map_err(|e| Error::io(rdir.display().to_string(), e))?;
    write_json(&dirs.metrics_json(), &report)?;
    write_table1(&rdir.join("table1.csv"), &report)?;
    write_table2(&rdir.join("table2.csv"), &report)?;
    write_binned(&rdir.join("binned_mae.csv"), &report)?;
    let mut written = vec![
        dirs.metrics_json(),
        rdir.join("table1.csv"),
        rdir.join("table2.csv"),
        rdir.join("binned_mae.csv"),
    ];
    written.extend(write_figure_eight(&preds, &rdir)?);
    record_hashes(dirs, &written)?;
    Ok(report)
}

fn write_table1(path: &Path, report: &MetricReport) -> Result<()> {
    let mut text = String::from("model,mae_deg,mse_deg2,me_deg\n");
    for m in &report.models {
        text.push_str(&format!(
            "{},{},{},{}\n",
            m.model, m.metrics.mae_deg, m.metrics.mse_deg2, m.metrics.me_deg
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_table2(path: &Path, report: &MetricReport) -> Result<()> {
    let mut text = String::from("condition,count");
    for name in MODEL_NAMES {
        text.push_str(&format!(",{name}"));
    }
    text.push('\n');
    for row in &report.conditions {
        text.push_str(&format!("\"{}\",{}", row.condition, row.count));
        for m in &row.mae_deg {
            match m {
                Some(v) => text.push_str(&format!(",{v}")),
                None => text.push(','),
            }
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write_binned(path: &Path, report: &MetricReport) -> Result<()> {
    let mut text = String::from("model,lo_deg,mae_deg,share_pct,count\n");
    for curve in &report.curves {
        for b in &curve.bins {
            text.push_str(&format!(
                "{},{},{},{},{}\n",
                curve.model, b.lo_deg, b.mae_deg, b.share_pct, b.count
            ));
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Exports the figure-eight trace (CSV and SVG) when the test split has one.
fn write_figure_eight(preds: &TestPredictions, rdir: &Path) -> Result<Vec<PathBuf>> {
    let id = match select_trace_scenario(&preds.rows, Maneuver::FigureEight) {
        Ok(id) => id,
        Err(Error::Lookup { .. }) => {
            log::warn!("no figure-eight scenario in the test split; skipping trace export");
            return Ok(Vec::new());
        }
        Err(e) => return Err(e),
    };
    let mut indexed: Vec<usize> = (0..preds.rows.len())
        .filter(|&i| preds.rows[i].scenario_id == id)
        .collect();
    indexed.sort_by_key(|&i| preds.rows[i].t_index);

    let t: Vec<f64> = indexed.iter().map(|&i| preds.rows[i].t).collect();
    let gt: Vec<f64> = indexed.iter().map(|&i| preds.rows[i].y).collect();
    let deltas: [Option<Vec<f64>>; 6] = [
        Some(indexed.iter().map(|&i| preds.rows[i].input.delta_ml).collect()),
        Some(indexed.iter().map(|&i| preds.rows[i].input.delta_vm1).collect()),
        Some(indexed.iter().map(|&i| preds.rows[i].input.delta_vm2).collect()),
        None,
        None,
        None,
    ];
    let series: Vec<TraceSeries> = MODEL_NAMES
        .iter()
        .enumerate()
        .map(|(m, name)| TraceSeries {
            model: name.to_string(),
            beta: indexed.iter().map(|&i| preds.by_model[m][i]).collect(),
            delta: deltas[m].clone(),
        })
        .collect();
    let csv_path = rdir.join("figure_eight.csv");
    write_trace_csv(&csv_path, &t, &gt, &series)?;

    let gt_deg: Vec<f64> = gt.iter().map(|b| b * RAD2DEG).collect();
    let mut plot_series = vec![Series { name: "ground truth", x: &t, y: &gt_deg }];
    let models_deg: Vec<Vec<f64>> = (0..6)
        .map(|m| indexed.iter().map(|&i| preds.by_model[m][i] * RAD2DEG).collect())
        .collect();
    for (m, name) in MODEL_NAMES.iter().enumerate() {
        plot_series.push(Series { name, x: &t, y: &models_deg[m] });
    }
    let svg_path = rdir.join("figure_eight.svg");
    line_plot(
        &svg_path,
        &format!("figure-eight scenario {id}"),
        "t (s)",
        "sideslip (deg)",
        &plot_series,
    )?;
    Ok(vec![csv_path, svg_path])
}

/// Residual-correlation check of the geometric model on the test split.
pub fn stage_validate_hypothesis(cfg: &RunConfig, dirs: &RunDir) -> Result<CorrelationStats> {
    ensure_config_echo(cfg, dirs)?;
    let (_, _, test) = load_splits(cfg, dirs, "validate-hypothesis")?;
    let records = collect_residuals_vmm1(&test, &cfg.sim.geometry)?;
    let stats = residual_correlation(&records)?;
    let rdir = dirs.report_dir();
    fs::create_dir_all(&rdir).map_err(|e| Error::io(rdir.display().to_string(), e))?;
    write_json(&dirs.hypothesis_json(), &stats)?;
    record_hashes(dirs, &[dirs.hypothesis_json()])?;
    Ok(stats)
}

/// Deep-fusion ablation over branch subsets.
pub fn stage_ablate(cfg: &RunConfig, dirs: &RunDir) -> Result<Vec<AblationRow>> {
    ensure_config_echo(cfg, dirs)?;
    let train = load_rows(dirs, "train", "ablate")?;
    let val = load_rows(dirs, "val", "ablate")?;
    let test = load_rows(dirs, "test", "ablate")?;
    let rows = run_ablation(&train, &val, &test, &cfg.df_options())?;

    let rdir = dirs.report_dir();
    fs::create_dir_all(&rdir).map_err(|e| Error::io(rdir.display().to_string(), e))?;
    let mut text = String::from("subset,mae_deg,mse_deg2,me_deg\n");
    for r in &rows {
        text.push_str(&format!(
            "{},{},{},{}\n",
            r.subset, r.metrics.mae_deg, r.metrics.mse_deg2, r.metrics.me_deg
        ));
    }
    let csv = rdir.join("ablation.csv");
    fs::write(&csv, text).map_err(|e| Error::io(csv.display().to_string(), e))?;
    write_json(&rdir.join("ablation.json"), &rows)?;
    record_hashes(dirs, &[csv, rdir.join("ablation.json")])?;
    Ok(rows)
}

/// Runs the requested stages in canonical order.
pub fn run_pipeline(cfg: &RunConfig, stages: &[Stage], run_dir: &Path) -> Result<()> {
    cfg.validate()?;
    let dirs = RunDir::new(run_dir);
    for stage in Stage::ORDER {
        if !stages.contains(&stage) {
            continue;
        }
        log::info!("stage {}", stage.name());
        match stage {
            Stage::Simulate => stage_simulate(cfg, &dirs)?,
            Stage::TrainMl => stage_train_ml(cfg, &dirs)?,
            Stage::BuildFusion => stage_build_fusion(cfg, &dirs)?,
            Stage::TrainDf => stage_train_df(cfg, &dirs)?,
            Stage::TrainGf => stage_train_gf(cfg, &dirs)?,
            Stage::Evaluate => {
                stage_evaluate(cfg, &dirs)?;
            }
            Stage::ValidateHypothesis => {
                stage_validate_hypothesis(cfg, &dirs)?;
            }
            Stage::Ablate => {
                stage_ablate(cfg, &dirs)?;
            }
        }
    }
    Ok(())
}

/// Human-readable rendering of the report for terminal output.
pub fn format_report(report: &MetricReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("test samples: {}\n", report.sample_count));
    out.push_str("model   MAE(deg)   MSE(deg2)  ME(deg)\n");
    for m in &report.models {
        out.push_str(&format!(
            "{:<7} {:<10.4} {:<10.4} {:<10.4}\n",
            m.model, m.metrics.mae_deg, m.metrics.mse_deg2, m.metrics.me_deg
        ));
    }
    out.push_str("\ncondition                     n      ");
    for name in MODEL_NAMES {
        out.push_str(&format!("{name:>8}"));
    }
    out.push('\n');
    for c in &report.conditions {
        out.push_str(&format!("{:<28} {:>6} ", c.condition, c.count));
        for m in &c.mae_deg {
            match m {
                Some(v) => out.push_str(&format!("{v:>8.4}")),
                None => out.push_str("       -"),
            }
        }
        out.push('\n');
    }
    out
}

/// Reads a previously written metrics report.
pub fn load_report(dirs: &RunDir) -> Result<MetricReport> {
    read_json(&dirs.metrics_json())
}

/// Reads the training log of the sequence model.
pub fn load_train_log(dirs: &RunDir) -> Result<TrainLog> {
    read_json(&dirs.ml_train_log())
}
