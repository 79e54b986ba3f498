//! Fusion dataset construction: one row of aligned branch estimates per
//! evaluable time step.
//!
//! Rows are ordered canonically (scenario id, then time), so the fitted
//! fusers do not depend on the order scenarios arrive in. Split membership
//! is inherited from the scenario-level split: build per split, never mix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::super::vmm::{run_vmm2_full, vmm1_estimate, vmm1_uncertainty, KfConfig};
use crate::data::{make_windows, FusionInput, Maneuver, Scenario, WindowConfig};
use crate::error::{Error, Result};
use crate::ml::Model;
use crate::sim::VehicleGeometry;

/// One aligned sample: branch estimates, context and target at a time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionRow {
    pub scenario_id: String,
    pub maneuver: Maneuver,
    /// Frame index of the window end within its scenario.
    pub t_index: usize,
    /// Time (s) of that frame.
    pub t: f64,
    /// Speed (m/s) at that frame, for the expert rule and conditioning.
    pub v_s: f64,
    /// Lateral acceleration (m/s²) at that frame.
    pub a_y: f64,
    /// Branch estimates; `delta_ml` is the raw Student-t variance.
    pub input: FusionInput,
    /// Ground-truth sideslip (rad).
    pub y: f64,
}

/// Builds aligned fusion rows for every window of every scenario.
///
/// The learned estimate comes from the window-end prediction, the geometric
/// model from the same frame, the filtered wheel-speed model from a full
/// sequential pass over the scenario.
pub fn build_fusion_dataset(
    model: &Model,
    kf_cfg: &KfConfig,
    geom: &VehicleGeometry,
    scenarios: &[Scenario],
    wcfg: &WindowConfig,
) -> Result<Vec<FusionRow>> {
    let mut order: Vec<&Scenario> = scenarios.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));

    let mut rows = Vec::new();
    for scenario in order {
        let windows = make_windows(scenario, wcfg)?;
        let vmm2 = run_vmm2_full(scenario, kf_cfg)?;
        if vmm2.len() != scenario.len() {
            return Err(Error::Misaligned {
                what: format!("vmm2 trace for `{}`", scenario.id),
                left: vmm2.len(),
                right: scenario.len(),
            });
        }
        for w in &windows {
            let t = w.t_index;
            let frame = &scenario.frames[t];
            let ml = model.estimate_at_window_end(&w.x)?;
            let (beta_vm1, yaw_vm1) = vmm1_estimate(frame, geom)?;
            let delta_vm1 = vmm1_uncertainty(yaw_vm1, frame.yaw_rate_obd);
            let v2 = &vmm2[t];
            rows.push(FusionRow {
                scenario_id: scenario.id.clone(),
                maneuver: scenario.maneuver,
                t_index: t,
                t: frame.t,
                v_s: frame.v_s,
                a_y: frame.a_y,
                input: FusionInput {
                    beta_ml: ml.beta,
                    delta_ml: ml.delta,
                    beta_vm1,
                    delta_vm1,
                    beta_vm2: v2.beta,
                    delta_vm2: v2.delta,
                },
                y: scenario.beta_gt[t],
            });
        }
    }
    Ok(rows)
}

pub const FUSION_CSV_HEADER: &str =
    "beta_ml,delta_ml,beta_vm1,delta_vm1,beta_vm2,delta_vm2,y";

/// Exports rows in the seven-column interchange format.
pub fn write_fusion_csv(rows: &[FusionRow], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    w.write_record(FUSION_CSV_HEADER.split(','))
        .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    for r in rows {
        let h = r.input.as_array();
        let record: Vec<String> = h
            .iter()
            .chain(std::iter::once(&r.y))
            .map(|v| format!("{v}"))
            .collect();
        w.write_record(&record)
            .map_err(|e| Error::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Reads the seven-column interchange format back as (input, target) pairs.
pub fn load_fusion_csv(path: &Path) -> Result<Vec<(FusionInput, f64)>> {
    let pstr = path.display().to_string();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Parse { path: pstr.clone(), msg: e.to_string() })?;
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { path: pstr.clone(), msg: e.to_string() })?;
        if line == 0 {
            let header = rec.iter().collect::<Vec<_>>().join(",");
            if header != FUSION_CSV_HEADER {
                return Err(Error::Parse { path: pstr, msg: format!("bad header `{header}`") });
            }
            continue;
        }
        if rec.len() != 7 {
            return Err(Error::Parse {
                path: pstr,
                msg: format!("row {line}: expected 7 columns, got {}", rec.len()),
            });
        }
        let mut vals = [0.0f64; 7];
        for (i, field) in rec.iter().enumerate() {
            vals[i] = field.parse().map_err(|e| Error::Parse {
                path: pstr.clone(),
                msg: format!("row {line} col {i}: {e}"),
            })?;
        }
        out.push((
            FusionInput::from_array([vals[0], vals[1], vals[2], vals[3], vals[4], vals[5]]),
            vals[6],
        ));
    }
    Ok(out)
}
