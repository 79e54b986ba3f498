//! Sliding-window extraction for the sequence model.

use ndarray::{Array1, Array2};

use super::{Scenario, WindowConfig, INPUT_DIM};
use crate::error::{Error, Result};

/// One training/evaluation sample.
///
/// `x` holds the observed feature rows for steps `t-L+1..=t`; `y` holds the
/// ground-truth sideslip at steps `t..=t+F`. `t_index` is the 0-based frame
/// index of the last observed step, used to align estimates across branches.
#[derive(Debug, Clone)]
pub struct Window {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub t_index: usize,
}

/// Extracts stride-1 sliding windows from a scenario.
///
/// A scenario of length `n` yields `n - (L + F)` windows: anchors run from
/// the first index with a full observation block up to `n - F - 2`, so the
/// final frame never serves as a label anchor. Windows touching any
/// non-finite value are dropped with a logged count (the scenario validator
/// rejects them anyway when loading from disk). The ground-truth series
/// never appears among the input columns; [`audit_no_target_leakage`]
/// checks this explicitly.
pub fn make_windows(scenario: &Scenario, cfg: &WindowConfig) -> Result<Vec<Window>> {
    cfg.validate()?;
    let n = scenario.len();
    let needed = cfg.min_scenario_len();
    if n < needed {
        return Err(Error::ScenarioTooShort {
            id: scenario.id.clone(),
            len: n,
            needed,
        });
    }
    audit_no_target_leakage(scenario)?;

    let l = cfg.l_obs;
    let f = cfg.f_horizon;
    let mut out = Vec::with_capacity(n - (l + f));
    let mut dropped = 0usize;
    for t in (l - 1)..(n - f - 1) {
        let start = t + 1 - l;
        let mut x = Array2::zeros((l, INPUT_DIM));
        let mut finite = true;
        for (row, frame) in scenario.frames[start..=t].iter().enumerate() {
            let feats = frame.features();
            if !feats.iter().all(|v| v.is_finite()) {
                finite = false;
                break;
            }
            for (col, v) in feats.iter().enumerate() {
                x[(row, col)] = *v;
            }
        }
        let y = Array1::from_iter(scenario.beta_gt[t..=t + f].iter().copied());
        if !finite || y.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        out.push(Window { x, y, t_index: t });
    }
    if dropped > 0 {
        log::warn!(
            "scenario `{}`: dropped {dropped} windows containing non-finite values",
            scenario.id
        );
    }
    Ok(out)
}

/// Verifies that no input channel reproduces the ground-truth series.
///
/// A constant zero channel matching a constant zero label (straight
/// driving) is vacuous, so the check only fires when the label series has
/// spread.
pub fn audit_no_target_leakage(scenario: &Scenario) -> Result<()> {
    let beta = &scenario.beta_gt;
    let spread = beta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &b| {
            (lo.min(b), hi.max(b))
        });
    if spread.1 - spread.0 <= 0.0 {
        return Ok(());
    }
    for col in 0..INPUT_DIM {
        let leaks = scenario
            .frames
            .iter()
            .zip(beta)
            .all(|(fr, &b)| fr.features()[col] == b);
        if leaks {
            return Err(Error::InvalidScenario {
                id: scenario.id.clone(),
                reason: format!("input channel {col} equals the ground-truth series"),
            });
        }
    }
    Ok(())
}
